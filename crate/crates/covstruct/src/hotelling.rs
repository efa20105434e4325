//! One-sample mean test against a fixed vector, with the chi-square
//! large-sample calibration.

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{mean_cov, Sample};
use crate::special::chi2_sf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub df: usize,
}

/// T^2 = N (mean - mu0)^T Vhat^{-1} (mean - mu0), compared against the
/// chi-square distribution with d degrees of freedom.
pub fn mean_test(sample: &Sample, mu0: &DVector<f64>, alpha: f64) -> Result<MeanTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let d = sample.d();
    let n = sample.n();
    if mu0.len() != d {
        return Err(Error::Dim { what: "mu0", expected: d, got: mu0.len() });
    }
    if n <= d {
        return Err(Error::TooFewRows { need: d + 1, got: n });
    }
    let mc = mean_cov(sample);
    let chol = Cholesky::new(mc.cov.clone()).ok_or(Error::Singular { what: "sample covariance" })?;
    let diff = &mc.mean - mu0;
    let statistic = n as f64 * diff.dot(&chol.solve(&diff));
    if !statistic.is_finite() {
        return Err(Error::NonFinite("mean test statistic"));
    }
    let p_value = chi2_sf(d as f64, statistic.max(0.0));
    Ok(MeanTestResult {
        statistic,
        p_value,
        reject: p_value <= alpha,
        alpha,
        df: d,
    })
}
