//! Combined multiple-contrast test: componentwise decisions with a shared
//! calibrated local level, so the global level is held while each contrast
//! row gets its own verdict.
//!
//! The bootstrap replicates need only the distribution of sqrt(N) times the
//! replicate mean, which for Gaussian replicate samples is exactly the
//! estimated covariance law, so each replicate costs one multivariate
//! normal draw.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hypothesis::{build_hypothesis, Domain, HypothesisKind, Variant};
use crate::mat::sqrt_psd;
use crate::moments::{sample_moments, Sample};
use crate::rng::stream;

/// Which empirical quantile of the replicate draws calibrates each
/// component: the literal signed draws, or their absolute values for an
/// exactly symmetric two-sided comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantileMode {
    #[serde(rename = "signed")]
    Signed,
    #[serde(rename = "absolute")]
    Absolute,
}

impl QuantileMode {
    pub fn name(self) -> &'static str {
        match self {
            QuantileMode::Signed => "signed",
            QuantileMode::Absolute => "absolute",
        }
    }
}

impl FromStr for QuantileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(QuantileMode::Signed),
            "absolute" => Ok(QuantileMode::Absolute),
            other => Err(Error::InvalidParam(format!(
                "unknown quantile mode {other:?}, expected signed or absolute"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MctpConfig {
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: QuantileMode,
}

impl MctpConfig {
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

/// Verdict for one contrast row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MctpComponent {
    /// Signed statistic sqrt(N) (C vhat) for this row.
    pub statistic: f64,
    /// Calibrated per-component quantile the absolute statistic is held
    /// against.
    pub quantile: f64,
    /// |statistic| / quantile when the quantile is positive.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratio: Option<f64>,
    pub reject: bool,
    /// False when every bootstrap draw for this row is zero; such rows are
    /// excluded from the familywise maximum.
    pub informative: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MctpResult {
    /// Calibrated local level, a multiple of 1/reps in [0, 1).
    pub beta_tilde: f64,
    pub components: Vec<MctpComponent>,
    pub global_reject: bool,
    /// Verdict for the rows comparing diagonal entries to their mean;
    /// present when the contrast has a designated equal-diagonal block.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reject_equal_diagonal: Option<bool>,
    /// Verdict for the rows testing off-diagonal entries against zero.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reject_diagonality: Option<bool>,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: QuantileMode,
    pub d: usize,
}

/// 0-based position of the ceiling-index (1 - (j/reps)/2) quantile in an
/// ascending column of `reps` draws.
fn quantile_pos(reps: usize, j: usize) -> usize {
    reps - j / 2 - 1
}

/// Combined contrast test for sphericity: the first d rows compare each
/// diagonal entry against the diagonal mean, the remaining rows test each
/// off-diagonal entry against zero.
pub fn sphericity_contrast_test(sample: &Sample, cfg: &MctpConfig) -> Result<MctpResult> {
    let hyp = build_hypothesis(
        HypothesisKind::Spherical,
        Domain::Covariance,
        Variant::Root,
        sample.d(),
    )?;
    contrast_test(sample, &hyp.c, Some(sample.d()), cfg)
}

/// Combined contrast test for an arbitrary contrast matrix with target
/// zero.  `equal_diag_rows` marks how many leading rows form the
/// equal-diagonal block for the sub-hypothesis summary.
pub fn contrast_test(
    sample: &Sample,
    c: &DMatrix<f64>,
    equal_diag_rows: Option<usize>,
    cfg: &MctpConfig,
) -> Result<MctpResult> {
    cfg.validate()?;
    let moments = sample_moments(sample)?;
    let p = moments.v.len();
    if c.ncols() != p {
        return Err(Error::Dim { what: "contrast columns", expected: p, got: c.ncols() });
    }
    if c.nrows() == 0 {
        return Err(Error::InvalidParam("contrast matrix has no rows".into()));
    }
    let n = sample.n();
    let reps = cfg.reps;
    let rows = c.nrows();

    let observed = c * &moments.v * (n as f64).sqrt();

    let l = sqrt_psd(&moments.sigma_dv)?;
    let draws: Vec<DVector<f64>> = (0..reps)
        .into_par_iter()
        .with_min_len(32)
        .map(|b| {
            let mut rng = stream(cfg.seed, &[b as u64]);
            let mut u = DVector::zeros(p);
            for k in 0..p {
                u[k] = StandardNormal.sample(&mut rng);
            }
            c * (&l * u)
        })
        .collect();

    // per-component ascending draw columns, signed or absolute per mode
    let mut sorted: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); rows];
    let mut informative = vec![false; rows];
    for t in &draws {
        for (lrow, col) in sorted.iter_mut().enumerate() {
            let v = t[lrow];
            if v != 0.0 {
                informative[lrow] = true;
            }
            col.push(match cfg.mode {
                QuantileMode::Signed => v,
                QuantileMode::Absolute => v.abs(),
            });
        }
    }
    for col in &mut sorted {
        col.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    }

    // Component lrow fires in replicate b once the local level j/reps reaches
    // 2 * (number of column draws its absolute draw does not exceed); the
    // familywise rejection of replicate b starts at the smallest such level
    // over informative components.
    let mut first_fire = vec![usize::MAX; reps];
    for (b, t) in draws.iter().enumerate() {
        for lrow in 0..rows {
            if !informative[lrow] {
                continue;
            }
            let val = t[lrow].abs();
            let below = sorted[lrow].partition_point(|&x| x < val);
            let flip = 2 * (reps - below);
            if flip < first_fire[b] {
                first_fire[b] = flip;
            }
        }
    }
    let mut starts = vec![0usize; reps + 1];
    for &f in &first_fire {
        if f <= reps {
            starts[f] += 1;
        }
    }
    let mut best_j = 0usize;
    let mut firing = 0usize;
    for j in 0..reps {
        firing += starts[j];
        if (firing as f64) <= cfg.alpha * reps as f64 {
            best_j = j;
        }
    }
    let beta_tilde = best_j as f64 / reps as f64;

    let qpos = quantile_pos(reps, best_j);
    let components: Vec<MctpComponent> = (0..rows)
        .map(|lrow| {
            let quantile = sorted[lrow][qpos];
            let stat = observed[lrow];
            let reject = informative[lrow] && stat.abs() > quantile;
            MctpComponent {
                statistic: stat,
                quantile,
                ratio: (quantile > 0.0).then(|| stat.abs() / quantile),
                reject,
                informative: informative[lrow],
            }
        })
        .collect();

    let global_reject = components.iter().any(|c| c.reject);
    let (reject_equal_diagonal, reject_diagonality) = match equal_diag_rows {
        Some(k) if k <= rows => (
            Some(components[..k].iter().any(|c| c.reject)),
            Some(components[k..].iter().any(|c| c.reject)),
        ),
        _ => (None, None),
    };

    Ok(MctpResult {
        beta_tilde,
        components,
        global_reject,
        reject_equal_diagonal,
        reject_diagonality,
        alpha: cfg.alpha,
        reps: cfg.reps,
        seed: cfg.seed,
        mode: cfg.mode,
        d: sample.d(),
    })
}
