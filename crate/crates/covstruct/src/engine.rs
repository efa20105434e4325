//! Test engine: the quadratic-form statistic, Monte-Carlo and parametric
//! bootstrap critical values, and per-test orchestration.
//!
//! All bootstrap samplers here draw from exact finite-sample distributions
//! of the replicate statistic instead of materializing N pseudo-observations
//! per replicate: the Gaussian sample mean and sample covariance are
//! independent, with a normal respectively Wishart law, which collapses a
//! replicate to a handful of chi-square and normal draws.  The literal
//! samplers are kept as `_literal` functions and the two routes are held
//! together by distribution-equality tests.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hypothesis::{build_hypothesis, Domain, Hypothesis, HypothesisKind, TransformKind, Variant};
use crate::mat::{sqrt_psd, sym_eigen};
use crate::moments::{corr_moments, mean_cov, sample_moments, Sample};
use crate::rng::stream;

/// Eigenvalues this far below the largest are treated as numerical zeros.
const EIGENVALUE_DROP_TOL: f64 = 1e-12;

/// Replicate discard fraction above which results carry a warning flag.
const DISCARD_WARN_FRACTION: f64 = 0.05;

/// How the critical value is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Weighted chi-square Monte Carlo from the estimated covariance.
    #[serde(rename = "mc")]
    MonteCarlo,
    /// Parametric bootstrap draws centered at zero.
    #[serde(rename = "boot")]
    Bootstrap,
    /// Parametric bootstrap centered at the estimate, with the transform
    /// re-applied to every replicate mean.
    #[serde(rename = "boot-hstar")]
    BootstrapRecentered,
    /// Parametric bootstrap with the transform folded into the covariance.
    #[serde(rename = "boot-hdagger")]
    BootstrapTransformedCov,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Bootstrap => "boot",
            Method::BootstrapRecentered => "boot-hstar",
            Method::BootstrapTransformedCov => "boot-hdagger",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::MonteCarlo),
            "boot" => Ok(Method::Bootstrap),
            "boot-hstar" => Ok(Method::BootstrapRecentered),
            "boot-hdagger" => Ok(Method::BootstrapTransformedCov),
            other => Err(Error::InvalidParam(format!(
                "unknown method {other:?}, expected mc, boot, boot-hstar or boot-hdagger"
            ))),
        }
    }
}

/// Settings for a single structure test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TestConfig {
    pub method: Method,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

impl TestConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParam("reps must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a structure test.
///
/// `statistic`, `critical_value` and `p_value` are absent exactly when
/// `degenerate` is set: a zero band denominator makes the ratio transform
/// undefined, which contradicts the tested structure outright, so the test
/// reports a rejection without a statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub critical_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub reject: bool,
    pub alpha: f64,
    pub method: Method,
    pub reps: usize,
    pub seed: u64,
    pub degenerate: bool,
    /// Replicates dropped for non-finite or zero-denominator statistics.
    pub discarded: usize,
    /// Set when more than 5% of replicates were discarded.
    pub discard_warning: bool,
    /// Number of retained eigenvalues of the contrasted covariance.
    pub weights_rank: usize,
}

impl TestResult {
    fn degenerate_rejection(cfg: &TestConfig) -> TestResult {
        TestResult {
            statistic: None,
            critical_value: None,
            p_value: None,
            reject: true,
            alpha: cfg.alpha,
            method: cfg.method,
            reps: cfg.reps,
            seed: cfg.seed,
            degenerate: true,
            discarded: 0,
            discard_warning: false,
            weights_rank: 0,
        }
    }
}

/// Contrasted covariance C M C^T, symmetrized.
pub fn contrasted_cov(c: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let csc = c * m * c.transpose();
    (&csc + csc.transpose()) * 0.5
}

/// The quadratic-form statistic N ||C t - zeta||^2 / tr(C S C^T), with the
/// contrasted covariance passed in precomputed form.
pub fn ats_from_parts(resid: &DVector<f64>, csc: &DMatrix<f64>, n: usize) -> Result<f64> {
    let trace = csc.trace();
    if !trace.is_finite() {
        return Err(Error::NonFinite("contrasted covariance trace"));
    }
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let stat = n as f64 * resid.norm_squared() / trace;
    if !stat.is_finite() {
        return Err(Error::NonFinite("test statistic"));
    }
    Ok(stat)
}

/// Convenience form of [`ats_from_parts`] building the residual and the
/// contrasted covariance from the raw pieces.
pub fn ats_statistic(
    c: &DMatrix<f64>,
    zeta: &DVector<f64>,
    t: &DVector<f64>,
    sigma_eff: &DMatrix<f64>,
    n: usize,
) -> Result<f64> {
    let resid = c * t - zeta;
    ats_from_parts(&resid, &contrasted_cov(c, sigma_eff), n)
}

/// Descending eigenvalues of a symmetric PSD matrix with numerical zeros
/// removed; errors when no positive eigenvalue remains.
pub fn kept_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (vals, _) = sym_eigen(m)?;
    let lmax = vals[0];
    if !(lmax > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(vals.iter().copied().filter(|&l| l >= EIGENVALUE_DROP_TOL * lmax).collect())
}

/// Draws from the weighted chi-square limit: sum of lam_k * Z_k^2 per
/// replicate, one derived generator per replicate index.
pub fn mc_draws(lams: &[f64], reps: usize, seed: u64) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .with_min_len(64)
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            lams.iter()
                .map(|&l| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    l * z * z
                })
                .sum()
        })
        .collect()
}

/// Zero-centered bootstrap replicates in eigenvalue space.
///
/// For Gaussian replicate samples the mean and covariance are independent,
/// so the replicate statistic equals
/// (sum lam_k A_k) / ((1/(N-1)) sum lam_k B_k) with A_k ~ chi2(1) and
/// B_k ~ chi2(N-1), which this draws directly.
pub fn boot_eigen_draws(lams: &[f64], n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let df = (n - 1) as f64;
    let chi2_df = Gamma::new(df / 2.0, 2.0)
        .map_err(|e| Error::InvalidParam(format!("chi-square setup: {e}")))?;
    Ok((0..reps)
        .into_par_iter()
        .with_min_len(64)
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let num: f64 = lams
                .iter()
                .map(|&l| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    l * z * z
                })
                .sum();
            let den: f64 = lams.iter().map(|&l| l * chi2_df.sample(&mut rng)).sum();
            num / (den / df)
        })
        .collect())
}

/// Reference implementation of the zero-centered bootstrap that really
/// generates N vectors per replicate; exists to validate
/// [`boot_eigen_draws`].
pub fn boot_eigen_draws_literal(
    c: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let l = sqrt_psd(sigma)?;
    let q = sigma.nrows();
    Ok((0..reps)
        .into_par_iter()
        .with_min_len(1)
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let mut data = DMatrix::zeros(n, q);
            let mut z = DVector::zeros(q);
            for row in 0..n {
                for k in 0..q {
                    z[k] = StandardNormal.sample(&mut rng);
                }
                let y = &l * &z;
                for k in 0..q {
                    data[(row, k)] = y[k];
                }
            }
            let mc = mean_cov(&Sample::from_matrix(data).expect("finite bootstrap draws"));
            let resid = c * mc.mean;
            let trace = contrasted_cov(c, &mc.cov).trace();
            n as f64 * resid.norm_squared() / trace
        })
        .collect())
}

/// One recentered-bootstrap replicate statistic from a replicate mean and
/// covariance; `None` marks a discarded replicate.
fn recentered_replicate_stat(
    hyp: &Hypothesis,
    t_obs: &DVector<f64>,
    ybar: &DVector<f64>,
    sigma_star: &DMatrix<f64>,
    n: usize,
) -> Option<f64> {
    let t = hyp.transformed(ybar).ok()?;
    let j = hyp.jacobian(ybar).ok()?;
    let resid = &hyp.c * (t - t_obs);
    let sigma_eff = &j * sigma_star * j.transpose();
    let trace = contrasted_cov(&hyp.c, &sigma_eff).trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return None;
    }
    let stat = n as f64 * resid.norm_squared() / trace;
    stat.is_finite().then_some(stat)
}

/// Recentered bootstrap replicates: means drawn around the observed vector,
/// the transform re-applied per replicate, covariances drawn as Wishart
/// matrices through their triangular factorization.  Falls back to the
/// literal sampler when N - 1 is below the vector dimension, where the
/// triangular construction is unavailable.
pub fn recentered_draws(
    hyp: &Hypothesis,
    x: &DVector<f64>,
    sigma: &DMatrix<f64>,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let q = x.len();
    if n - 1 < q {
        return recentered_draws_literal(hyp, x, sigma, n, reps, seed);
    }
    let l = sqrt_psd(sigma)?;
    let t_obs = hyp.transformed(x)?;
    let df = (n - 1) as f64;
    let diag_dists: Vec<Gamma<f64>> = (0..q)
        .map(|i| Gamma::new((df - i as f64) / 2.0, 2.0))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidParam(format!("chi-square setup: {e}")))?;
    let sqrt_n = (n as f64).sqrt();

    let stats: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .with_min_len(16)
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let mut z = DVector::zeros(q);
            for k in 0..q {
                z[k] = StandardNormal.sample(&mut rng);
            }
            let ybar = x + &l * z / sqrt_n;

            let mut t = DMatrix::zeros(q, q);
            for i in 0..q {
                t[(i, i)] = diag_dists[i].sample(&mut rng).sqrt();
                for k in i + 1..q {
                    t[(k, i)] = StandardNormal.sample(&mut rng);
                }
            }
            let m = &l * t;
            let sigma_star = &m * m.transpose() / df;
            recentered_replicate_stat(hyp, &t_obs, &ybar, &sigma_star, n)
        })
        .collect();
    let discarded = stats.iter().filter(|s| s.is_none()).count();
    Ok((stats.into_iter().flatten().collect(), discarded))
}

/// Reference implementation of the recentered bootstrap generating N
/// vectors per replicate; validates [`recentered_draws`] and serves as its
/// small-sample fallback.
pub fn recentered_draws_literal(
    hyp: &Hypothesis,
    x: &DVector<f64>,
    sigma: &DMatrix<f64>,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    if n < 2 {
        return Err(Error::TooFewRows { need: 2, got: n });
    }
    let l = sqrt_psd(sigma)?;
    let t_obs = hyp.transformed(x)?;
    let q = x.len();
    let stats: Vec<Option<f64>> = (0..reps)
        .into_par_iter()
        .with_min_len(1)
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let mut data = DMatrix::zeros(n, q);
            let mut z = DVector::zeros(q);
            for row in 0..n {
                for k in 0..q {
                    z[k] = StandardNormal.sample(&mut rng);
                }
                let y = x + &l * &z;
                for k in 0..q {
                    data[(row, k)] = y[k];
                }
            }
            let mc = mean_cov(&Sample::from_matrix(data).expect("finite bootstrap draws"));
            recentered_replicate_stat(hyp, &t_obs, &mc.mean, &mc.cov, n)
        })
        .collect();
    let discarded = stats.iter().filter(|s| s.is_none()).count();
    Ok((stats.into_iter().flatten().collect(), discarded))
}

/// Critical value, p-value, and decision from replicate draws.
///
/// The critical value is the ceiling-index empirical quantile; the decision
/// uses the integer count rule `#(draws >= observed) <= floor(alpha * B)`,
/// which coincides exactly with `observed > critical_value`.
pub fn calibrate(mut draws: Vec<f64>, observed: f64, alpha: f64) -> Result<(f64, f64, bool)> {
    let kept = draws.len();
    if kept == 0 {
        return Err(Error::AllReplicatesDiscarded);
    }
    draws.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    // largest count still within level alpha
    let mut cstar = 0usize;
    while (cstar + 1) as f64 <= alpha * kept as f64 {
        cstar += 1;
    }
    let critical = draws[kept - cstar - 1];
    let count_ge = draws.iter().filter(|&&v| v >= observed).count();
    let p_value = count_ge as f64 / kept as f64;
    let reject = count_ge <= cstar;
    debug_assert_eq!(reject, observed > critical);
    Ok((critical, p_value, reject))
}

/// Run a structure test end to end: moments, hypothesis, statistic,
/// critical value, decision.
pub fn run_structure_test(
    sample: &Sample,
    kind: HypothesisKind,
    domain: Domain,
    variant: Variant,
    cfg: &TestConfig,
) -> Result<TestResult> {
    cfg.validate()?;
    let hyp = build_hypothesis(kind, domain, variant, sample.d())?.pruned();
    let moments = sample_moments(sample)?;
    let (x, sigma) = match domain {
        Domain::Covariance => (moments.v.clone(), moments.sigma_dv.clone()),
        Domain::Correlation => {
            let cm = corr_moments(&moments)?;
            (cm.r, cm.upsilon_dv)
        }
    };
    let n = sample.n();

    let t = match hyp.transformed(&x) {
        Ok(t) => t,
        Err(Error::DegenerateRatio { .. }) => return Ok(TestResult::degenerate_rejection(cfg)),
        Err(e) => return Err(e),
    };
    let sigma_eff = match hyp.transform {
        TransformKind::Identity => sigma.clone(),
        _ => {
            let j = hyp.jacobian(&x)?;
            let se = &j * &sigma * j.transpose();
            (&se + se.transpose()) * 0.5
        }
    };
    let resid = &hyp.c * &t - &hyp.zeta;
    let csc = contrasted_cov(&hyp.c, &sigma_eff);
    let statistic = ats_from_parts(&resid, &csc, n)?;
    let lams = kept_eigenvalues(&csc)?;
    let weights_rank = lams.len();

    let (draws, discarded) = match cfg.method {
        Method::MonteCarlo => {
            let trace = csc.trace();
            let normalized: Vec<f64> = lams.iter().map(|l| l / trace).collect();
            (mc_draws(&normalized, cfg.reps, cfg.seed), 0)
        }
        Method::Bootstrap | Method::BootstrapTransformedCov => {
            (boot_eigen_draws(&lams, n, cfg.reps, cfg.seed)?, 0)
        }
        Method::BootstrapRecentered => recentered_draws(&hyp, &x, &sigma, n, cfg.reps, cfg.seed)?,
    };
    let (critical_value, p_value, reject) = calibrate(draws, statistic, cfg.alpha)?;

    Ok(TestResult {
        statistic: Some(statistic),
        critical_value: Some(critical_value),
        p_value: Some(p_value),
        reject,
        alpha: cfg.alpha,
        method: cfg.method,
        reps: cfg.reps,
        seed: cfg.seed,
        degenerate: false,
        discarded,
        discard_warning: discarded as f64 > DISCARD_WARN_FRACTION * cfg.reps as f64,
        weights_rank,
    })
}
