//! Release gate: checks operating characteristics against frozen reference
//! values and re-runs the oracle checks, one summary line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every
//! line; under the default harness the lines surface only on failure.

use std::time::Instant;

use covstruct::engine::{
    boot_eigen_draws, boot_eigen_draws_literal, calibrate, contrasted_cov, kept_eigenvalues,
    mc_draws, recentered_draws, recentered_draws_literal, run_structure_test, Method, TestConfig,
};
use covstruct::hypothesis::{build_hypothesis, Domain, Hypothesis, HypothesisKind, Variant};
use covstruct::mat::{band_pairs, centering, dvech};
use covstruct::mctp::{sphericity_contrast_test, MctpConfig, QuantileMode};
use covstruct::moments::{corr_from_cov, corr_jacobian, sample_moments};
use covstruct::rng::{derive_seed, stream};
use covstruct::sim::{
    generate_sample, run_power_study, run_scenario, ErrorDistribution, PowerStudy, Scenario,
    TableRow,
};
use covstruct::special::chi2_quantile;
use covstruct::structures::{make_structure, StructureKind};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const GATE_SEED: u64 = 882_001;
const ALPHA: f64 = 0.05;
const N_BOOT: usize = 1000;
const N_MC: usize = 10_000;

fn verdict(label: &str, ok: bool, details: &str) -> bool {
    println!(
        "ACCEPTANCE {label}: {} — {details}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn scenario(
    structure: StructureKind,
    n_list: Vec<usize>,
    dist: ErrorDistribution,
    n_sim: usize,
    methods: &[&str],
    seed: u64,
) -> Vec<TableRow> {
    run_scenario(&Scenario {
        structure,
        d: 5,
        n_list,
        dist,
        n_sim,
        n_boot: N_BOOT,
        n_mc: N_MC,
        alpha: ALPHA,
        seed,
        methods: methods.iter().map(|s| s.to_string()).collect(),
    })
    .unwrap()
}

fn rate(rows: &[TableRow], method: &str, n: usize) -> f64 {
    rows.iter()
        .find(|r| r.method == method && r.n == n)
        .unwrap_or_else(|| panic!("no row for {method} at N={n}"))
        .reject_pct
}

fn toeplitz_v2() -> StructureKind {
    StructureKind::Toeplitz {
        band: vec![1.2, 0.9, 0.8, 0.4, 0.1],
    }
}

fn ar_null() -> StructureKind {
    StructureKind::Ar { rho: 0.65 }
}

#[test]
fn criterion_toeplitz_type_one_error() {
    let start = Instant::now();
    let expected = [
        (ErrorDistribution::Normal, [(100usize, 5.15), (250, 4.82)]),
        (ErrorDistribution::StudentT9, [(100, 5.00), (250, 4.70)]),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (di, (dist, cells)) in expected.iter().enumerate() {
        let rows = scenario(
            toeplitz_v2(),
            vec![100, 250],
            *dist,
            2000,
            &["boot"],
            derive_seed(GATE_SEED, &[21, di as u64]),
        );
        for (n, want) in cells {
            let got = rate(&rows, "boot", *n);
            ok &= (got - want).abs() <= 1.5;
            details.push(format!("{} N={n}: {got:.2} vs {want}", dist.name()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 1800.0;
    details.push(format!("{secs:.0}s"));
    assert!(
        verdict("toeplitz-type-one-error", ok, &details.join(", ")),
        "rates outside ±1.5pp of the reference grid or over the time budget"
    );
}

#[test]
fn criterion_ar_type_one_error() {
    let mut details = Vec::new();
    let mut ok = true;
    let expected = [
        (ErrorDistribution::Normal, 5.45),
        (ErrorDistribution::StudentT9, 5.27),
    ];
    for (di, (dist, want)) in expected.iter().enumerate() {
        let rows = scenario(
            ar_null(),
            vec![250],
            *dist,
            2000,
            &["boot-hstar"],
            derive_seed(GATE_SEED, &[2, di as u64]),
        );
        let got = rate(&rows, "boot-hstar", 250);
        ok &= (got - want).abs() <= 1.5;
        details.push(format!("boot-hstar {} N=250: {got:.2} vs {want}", dist.name()));
    }
    for (di, dist) in ErrorDistribution::ALL.iter().enumerate() {
        let rows = scenario(
            ar_null(),
            vec![25],
            *dist,
            2000,
            &["mc-g"],
            derive_seed(GATE_SEED, &[3, di as u64]),
        );
        let got = rate(&rows, "mc-g", 25);
        ok &= got < 3.5;
        details.push(format!("mc-g {} N=25: {got:.2}", dist.name()));
    }
    assert!(
        verdict("ar-type-one-error", ok, &details.join(", ")),
        "recentered bootstrap off the reference rates or ratio Monte Carlo not conservative"
    );
}

#[test]
fn criterion_root_bootstrap_variants() {
    let mut details = Vec::new();
    let rows = scenario(
        ar_null(),
        vec![250],
        ErrorDistribution::Normal,
        2000,
        &["boot-hdagger"],
        derive_seed(GATE_SEED, &[4, 0]),
    );
    let hdag = rate(&rows, "boot-hdagger", 250);
    let value_ok = (hdag - 4.73).abs() <= 1.5;
    details.push(format!("boot-hdagger normal N=250: {hdag:.2} vs 4.73"));

    let mut wins = 0;
    for (di, dist) in ErrorDistribution::ALL.iter().enumerate() {
        let rows = scenario(
            ar_null(),
            vec![25],
            *dist,
            2000,
            &["boot-hstar", "boot-hdagger"],
            derive_seed(GATE_SEED, &[5, di as u64]),
        );
        let hstar = rate(&rows, "boot-hstar", 25);
        let hdag = rate(&rows, "boot-hdagger", 25);
        if hstar >= hdag {
            wins += 1;
        }
        details.push(format!(
            "{} N=25: h* {hstar:.2} vs h† {hdag:.2}",
            dist.name()
        ));
    }
    let order_ok = wins >= 3;
    details.push(format!("h* >= h† on {wins}/4 distributions"));
    assert!(
        verdict(
            "root-bootstrap-variants",
            value_ok && order_ok,
            &details.join(", ")
        ),
        "variant level off the reference value or h*/h† ordering not reproduced"
    );
}

#[test]
fn criterion_power_curve() {
    let rows = run_power_study(&PowerStudy {
        deltas: (0..=10).map(|k| k as f64 / 10.0).collect(),
        n: 250,
        dist: ErrorDistribution::Normal,
        n_sim: 1000,
        n_boot: N_BOOT,
        n_mc: N_MC,
        alpha: ALPHA,
        seed: derive_seed(GATE_SEED, &[6, 0]),
        methods: vec!["boot-hstar".into(), "boot-hstar-g".into()],
    })
    .unwrap();
    let curve = |method: &str| -> Vec<f64> {
        (0..=10)
            .map(|k| {
                let want = k as f64 / 10.0;
                rows.iter()
                    .find(|r| {
                        r.method == method && (r.delta.unwrap() - want).abs() < 1e-9
                    })
                    .unwrap()
                    .reject_pct
            })
            .collect()
    };
    let h = curve("boot-hstar");
    let g = curve("boot-hstar-g");
    let mut ok = true;
    let mut details = Vec::new();
    for (name, c) in [("h", &h), ("g", &g)] {
        let level_ok = (3.5..=6.5).contains(&c[0]);
        let mono_ok = c.windows(2).all(|w| w[1] >= w[0] - 2.0);
        ok &= level_ok && mono_ok;
        details.push(format!(
            "{name}: level {:.2}, monotone {}, power at half mix {:.1}",
            c[0], mono_ok, c[5]
        ));
    }
    ok &= g[5] > h[5];
    assert!(
        verdict("power-curve", ok, &details.join("; ")),
        "level outside [3.5, 6.5], a drop beyond 2pp, or ratio variant not ahead at half mix"
    );
}

fn wick_ok() -> (bool, String) {
    let v = make_structure(&ar_null(), 3).unwrap();
    let mut rng = stream(derive_seed(GATE_SEED, &[7, 0]), &[]);
    let sample = generate_sample(&v, ErrorDistribution::Normal, 20_000, &mut rng).unwrap();
    let m = sample_moments(&sample).unwrap();
    let pairs = band_pairs(3);
    let mut expect = DMatrix::zeros(6, 6);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            expect[(a, b)] = v[(i, k)] * v[(j, l)] + v[(i, l)] * v[(j, k)];
        }
    }
    let rel = (&m.sigma_dv - &expect).norm() / expect.norm();
    (rel <= 0.07, format!("fourth-moment rel err {rel:.3}"))
}

fn fd_jacobians_ok() -> (bool, String) {
    let mut worst = 0.0f64;
    let fd = |f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>| -> DMatrix<f64> {
        let out_len = f(x).len();
        let mut j = DMatrix::zeros(out_len, x.len());
        for c in 0..x.len() {
            let h = 1e-6 * x[c].abs().max(1.0);
            let (mut lo, mut hi) = (x.clone(), x.clone());
            lo[c] -= h;
            hi[c] += h;
            let col = (f(&hi) - f(&lo)) / (2.0 * h);
            j.set_column(c, &col);
        }
        j
    };
    let mut check_hyp = |hyp: &Hypothesis, point: &dyn Fn(&mut rand_chacha::ChaCha8Rng) -> DVector<f64>, tag: u64| {
        for i in 0..100u64 {
            let mut rng = stream(derive_seed(GATE_SEED, &[8, tag]), &[i]);
            let x = point(&mut rng);
            let analytic = hyp.jacobian(&x).unwrap();
            let numeric = fd(&|y| hyp.transformed(y).unwrap(), &x);
            let rel = (&numeric - &analytic).norm() / analytic.norm().max(1e-12);
            worst = worst.max(rel);
        }
    };
    let positive = |len: usize| {
        move |rng: &mut rand_chacha::ChaCha8Rng| {
            DVector::from_fn(len, |_, _| 0.4 + 1.6 * rng.random::<f64>())
        }
    };
    let signed = |len: usize, d: usize| {
        move |rng: &mut rand_chacha::ChaCha8Rng| {
            DVector::from_fn(len, |k, _| {
                let mag = 0.2 + 0.6 * rng.random::<f64>();
                if k < d || rng.random::<bool>() {
                    mag + 0.8
                } else {
                    -mag
                }
            })
        }
    };
    for d in [3usize, 4, 5] {
        let p = d * (d + 1) / 2;
        let root = build_hypothesis(HypothesisKind::Autoregressive, Domain::Covariance, Variant::Root, d).unwrap();
        check_hyp(&root, &signed(p, d), 10 + d as u64);
        let ratio = build_hypothesis(HypothesisKind::Autoregressive, Domain::Covariance, Variant::Ratio, d).unwrap();
        check_hyp(&ratio, &positive(p), 20 + d as u64);
        let strict = build_hypothesis(HypothesisKind::HeteroAutoregressive, Domain::Correlation, Variant::Root, d).unwrap();
        let pu = p - d;
        check_hyp(&strict, &signed(pu, 0), 30 + d as u64);
    }
    // correlation map: finite differences through cov -> corr vectorization
    for i in 0..100u64 {
        let mut rng = stream(derive_seed(GATE_SEED, &[8, 99]), &[i]);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let cov = &a * a.transpose() / 3.0 + DMatrix::identity(3, 3) * 0.5;
        let analytic = corr_jacobian(&cov).unwrap();
        let x = dvech(&cov);
        let numeric = fd(
            &|y: &DVector<f64>| {
                let m = covstruct::mat::dvech_inv(y).unwrap();
                let (corr, _) = corr_from_cov(&m).unwrap();
                covstruct::mat::dvech_strict(&corr)
            },
            &x,
        );
        let rel = (&numeric - &analytic).norm() / analytic.norm();
        worst = worst.max(rel);
    }
    (worst <= 1e-6, format!("jacobian worst rel err {worst:.2e}"))
}

fn nullspace_ok() -> (bool, String) {
    let mut worst = 0.0f64;
    let cases: Vec<(StructureKind, HypothesisKind, Domain, Variant)> = vec![
        (StructureKind::Diagonal { variances: vec![1.0, 2.0, 0.5, 1.3, 0.8] }, HypothesisKind::Diagonal, Domain::Covariance, Variant::Root),
        (StructureKind::Spherical { scale: 1.7 }, HypothesisKind::Spherical, Domain::Covariance, Variant::Root),
        (StructureKind::CompoundSymmetry { diag: 2.0, offdiag: 0.6 }, HypothesisKind::CompoundSymmetry, Domain::Covariance, Variant::Root),
        (StructureKind::Toeplitz { band: vec![2.0, 0.8, 0.5, 0.3, 0.2] }, HypothesisKind::Toeplitz, Domain::Covariance, Variant::Root),
        (StructureKind::Ar { rho: 0.65 }, HypothesisKind::Autoregressive, Domain::Covariance, Variant::Root),
        (StructureKind::Ar { rho: 0.42 }, HypothesisKind::Autoregressive, Domain::Covariance, Variant::Ratio),
        (StructureKind::Foar { scale: 2.3, rho: 0.55 }, HypothesisKind::FirstOrderAutoregressive, Domain::Covariance, Variant::Ratio),
        (StructureKind::HeteroCs { corr: 0.35, scales: vec![1.0, 1.5, 0.7, 1.2, 0.9] }, HypothesisKind::HeteroCompoundSymmetry, Domain::Correlation, Variant::Root),
        (StructureKind::HeteroToeplitz { band: vec![0.4, 0.25, 0.15, 0.1], scales: vec![1.2, 0.8, 1.5, 1.0, 0.6] }, HypothesisKind::HeteroToeplitz, Domain::Correlation, Variant::Root),
        (StructureKind::HeteroAr { rho: 0.6, scales: vec![0.9, 1.3, 1.1, 0.7, 1.4] }, HypothesisKind::HeteroAutoregressive, Domain::Correlation, Variant::Root),
    ];
    for d in [3usize, 4, 5] {
        for (structure, kind, domain, variant) in &cases {
            let structure = trim_structure(structure, d);
            let v = make_structure(&structure, d).unwrap();
            let x = match domain {
                Domain::Covariance => dvech(&v),
                Domain::Correlation => {
                    let (corr, _) = corr_from_cov(&v).unwrap();
                    covstruct::mat::dvech_strict(&corr)
                }
            };
            let hyp = build_hypothesis(*kind, *domain, *variant, d).unwrap().pruned();
            let resid = (&hyp.c * hyp.transformed(&x).unwrap() - &hyp.zeta).amax();
            worst = worst.max(resid);
        }
    }
    (worst <= 1e-12, format!("null-space worst residual {worst:.2e}"))
}

fn trim_structure(s: &StructureKind, d: usize) -> StructureKind {
    match s {
        StructureKind::Diagonal { variances } => StructureKind::Diagonal { variances: variances[..d].to_vec() },
        StructureKind::Toeplitz { band } => StructureKind::Toeplitz { band: band[..d].to_vec() },
        StructureKind::HeteroCs { corr, scales } => StructureKind::HeteroCs { corr: *corr, scales: scales[..d].to_vec() },
        StructureKind::HeteroToeplitz { band, scales } => StructureKind::HeteroToeplitz { band: band[..d - 1].to_vec(), scales: scales[..d].to_vec() },
        StructureKind::HeteroAr { rho, scales } => StructureKind::HeteroAr { rho: *rho, scales: scales[..d].to_vec() },
        other => other.clone(),
    }
}

fn mc_quantiles_ok() -> (bool, String) {
    let crit = |lams: &[f64], tag: u64| {
        let draws = mc_draws(lams, 200_000, derive_seed(GATE_SEED, &[9, tag]));
        calibrate(draws, 1.0, 0.05).unwrap().0
    };
    let one = crit(&[1.0], 0);
    let two = crit(&[0.5, 0.5], 1);
    let e1 = chi2_quantile(1.0, 0.95);
    let e2 = chi2_quantile(2.0, 0.95) / 2.0;
    let ok = (one - e1).abs() < 0.08 && (two - e2).abs() < 0.05;
    (ok, format!("rank-1 critical {one:.3} vs {e1:.3}, paired {two:.3} vs {e2:.3}"))
}

fn projections_ok() -> (bool, String) {
    let mut worst = 0.0f64;
    let kinds = [
        (HypothesisKind::Diagonal, Domain::Covariance, Variant::Root),
        (HypothesisKind::Diagonal, Domain::Correlation, Variant::Root),
        (HypothesisKind::Spherical, Domain::Covariance, Variant::Root),
        (HypothesisKind::CompoundSymmetry, Domain::Covariance, Variant::Root),
        (HypothesisKind::Toeplitz, Domain::Covariance, Variant::Root),
        (HypothesisKind::Autoregressive, Domain::Covariance, Variant::Root),
        (HypothesisKind::Autoregressive, Domain::Covariance, Variant::Ratio),
        (HypothesisKind::FirstOrderAutoregressive, Domain::Covariance, Variant::Ratio),
        (HypothesisKind::HeteroCompoundSymmetry, Domain::Correlation, Variant::Root),
        (HypothesisKind::HeteroToeplitz, Domain::Correlation, Variant::Root),
        (HypothesisKind::HeteroAutoregressive, Domain::Correlation, Variant::Root),
    ];
    for (kind, domain, variant) in kinds {
        for d in 3..=6 {
            let c = build_hypothesis(kind, domain, variant, d).unwrap().c;
            worst = worst.max((&c * &c - &c).amax());
            worst = worst.max((&c - c.transpose()).amax());
        }
    }
    for d in 2..=8 {
        let p = centering(d);
        worst = worst.max((&p * &p - &p).amax());
        let mut q = DMatrix::zeros(d, d);
        for i in 0..d {
            q[(i, (i + 1) % d)] = 1.0;
        }
        worst = worst.max((&q * &p * q.transpose() - &p).amax());
    }
    (worst <= 1e-12, format!("projection worst residual {worst:.2e}"))
}

fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn bootstrap_paths_ok() -> (bool, String) {
    let v = make_structure(&ar_null(), 3).unwrap();
    let mut rng = stream(derive_seed(GATE_SEED, &[10, 0]), &[]);
    let n = 40;
    let sample = generate_sample(&v, ErrorDistribution::Normal, n, &mut rng).unwrap();
    let m = sample_moments(&sample).unwrap();
    let hyp = build_hypothesis(HypothesisKind::Spherical, Domain::Covariance, Variant::Root, 3)
        .unwrap()
        .pruned();
    let lams = kept_eigenvalues(&contrasted_cov(&hyp.c, &m.sigma_dv)).unwrap();
    let k1 = ks_distance(
        boot_eigen_draws(&lams, n, 5000, derive_seed(GATE_SEED, &[10, 1])).unwrap(),
        boot_eigen_draws_literal(&hyp.c, &m.sigma_dv, n, 5000, derive_seed(GATE_SEED, &[10, 2]))
            .unwrap(),
    );
    let k2 = ks_distance(
        recentered_draws(&hyp, &m.v, &m.sigma_dv, n, 5000, derive_seed(GATE_SEED, &[10, 3]))
            .unwrap()
            .0,
        recentered_draws_literal(&hyp, &m.v, &m.sigma_dv, n, 5000, derive_seed(GATE_SEED, &[10, 4]))
            .unwrap()
            .0,
    );
    (k1 < 0.05 && k2 < 0.05, format!("KS {k1:.3} and {k2:.3}"))
}

fn determinism_ok() -> (bool, String) {
    let run = || {
        let v = make_structure(&ar_null(), 3).unwrap();
        let mut rng = stream(derive_seed(GATE_SEED, &[11, 0]), &[]);
        let sample = generate_sample(&v, ErrorDistribution::Normal, 60, &mut rng).unwrap();
        let test = run_structure_test(
            &sample,
            HypothesisKind::Autoregressive,
            Domain::Covariance,
            Variant::Root,
            &TestConfig {
                method: Method::BootstrapRecentered,
                alpha: ALPHA,
                reps: 300,
                seed: derive_seed(GATE_SEED, &[11, 1]),
            },
        )
        .unwrap();
        let rows = scenario(
            toeplitz_v2(),
            vec![25],
            ErrorDistribution::Normal,
            40,
            &["boot", "mc"],
            derive_seed(GATE_SEED, &[11, 2]),
        );
        serde_json::to_string(&(test, rows)).unwrap()
    };
    let outs: Vec<String> = [1usize, 8]
        .iter()
        .map(|&t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(run)
        })
        .collect();
    (outs[0] == outs[1], "1-thread and 8-thread runs byte-identical".into())
}

#[test]
fn criterion_oracle_suites() {
    let checks: Vec<(&str, (bool, String))> = vec![
        ("fourth-moment", wick_ok()),
        ("jacobians", fd_jacobians_ok()),
        ("null-space", nullspace_ok()),
        ("mc-quantiles", mc_quantiles_ok()),
        ("projections", projections_ok()),
        ("bootstrap-paths", bootstrap_paths_ok()),
        ("determinism", determinism_ok()),
    ];
    let ok = checks.iter().all(|(_, (ok, _))| *ok);
    let details: Vec<String> = checks
        .iter()
        .map(|(name, (ok, d))| format!("{name} {} ({d})", if *ok { "ok" } else { "FAILED" }))
        .collect();
    assert!(
        verdict("oracle-suites", ok, &details.join("; ")),
        "an oracle check failed"
    );
}

#[test]
fn criterion_mctp_level_and_attribution() {
    let n_sim = 2000;
    let n = 250;
    let cfg_for = |seed: u64| MctpConfig {
        alpha: ALPHA,
        reps: 1000,
        seed,
        mode: QuantileMode::Signed,
    };
    let run_all = |v: &DMatrix<f64>, tag: u64| -> Vec<covstruct::mctp::MctpResult> {
        (0..n_sim as u64)
            .map(|r| {
                let mut rng = stream(derive_seed(GATE_SEED, &[12, tag]), &[r, 0]);
                let sample = generate_sample(v, ErrorDistribution::Normal, n, &mut rng).unwrap();
                sphericity_contrast_test(
                    &sample,
                    &cfg_for(derive_seed(GATE_SEED, &[12, tag, r, 1])),
                )
                .unwrap()
            })
            .collect()
    };

    let null_runs = run_all(&(DMatrix::identity(3, 3) * 2.0), 0);
    let level =
        100.0 * null_runs.iter().filter(|r| r.global_reject).count() as f64 / n_sim as f64;

    let alt = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]);
    let alt_runs = run_all(&alt, 1);
    let rejecting: Vec<_> = alt_runs.iter().filter(|r| r.global_reject).collect();
    let diag_driven = rejecting
        .iter()
        .filter(|r| r.reject_equal_diagonal == Some(true))
        .count();
    let share = if rejecting.is_empty() {
        0.0
    } else {
        diag_driven as f64 / rejecting.len() as f64
    };
    let ok = level <= 6.5 && share > 0.9;
    assert!(
        verdict(
            "mctp-level-and-attribution",
            ok,
            &format!(
                "global level {level:.2}% on the spherical null; diagonal components drive {:.1}% of {} rejections under unequal variances",
                100.0 * share,
                rejecting.len()
            )
        ),
        "familywise level above 6.5% or rejections not attributed to the diagonal block"
    );
}
