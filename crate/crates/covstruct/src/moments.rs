//! Empirical moments: mean, covariance, bands-first vectorizations, the
//! fourth-moment covariance of the vectorized covariance estimator, and the
//! correlation-level counterpart obtained by the delta method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mat::{band_index, band_pairs, dvech, dvech_strict, strict_band_pairs, strict_dim, sym_dim};

/// Observation matrix with rows as observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Sample> {
        if data.nrows() < 2 {
            return Err(Error::TooFewRows { need: 2, got: data.nrows() });
        }
        if data.ncols() == 0 {
            return Err(Error::Dim { what: "sample columns", expected: 1, got: 0 });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample data"));
        }
        Ok(Sample { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Mean and covariance of a sample, with the covariance vectorized
/// bands-first.
#[derive(Clone, Debug)]
pub struct MeanCov {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub v: DVector<f64>,
}

/// [`MeanCov`] plus the empirical covariance of the vectorized
/// outer products, the fourth-moment input to every test statistic.
#[derive(Clone, Debug)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub v: DVector<f64>,
    pub sigma_dv: DMatrix<f64>,
}

/// Correlation matrix, its strict vectorization, and the delta-method
/// covariance of the vectorized correlation estimator.
#[derive(Clone, Debug)]
pub struct CorrMoments {
    pub corr: DMatrix<f64>,
    pub r: DVector<f64>,
    pub upsilon_dv: DMatrix<f64>,
}

fn centered(s: &Sample) -> (DVector<f64>, DMatrix<f64>) {
    let n = s.n();
    let mean = s.data.row_mean().transpose();
    let mut xc = s.data.clone();
    for j in 0..s.d() {
        let m = mean[j];
        for i in 0..n {
            xc[(i, j)] -= m;
        }
    }
    (mean, xc)
}

/// Sample mean and covariance (divisor N - 1).
pub fn mean_cov(s: &Sample) -> MeanCov {
    let n = s.n();
    let (mean, xc) = centered(s);
    // X_c^T X_c accumulates each symmetric pair from the same dot product,
    // so the result is exactly symmetric
    let cov = xc.tr_mul(&xc) / (n as f64 - 1.0);
    let v = dvech(&cov);
    MeanCov { mean, cov, v }
}

/// Full moment bundle: mean, covariance, and the empirical covariance of
/// the centered outer-product vectors (divisor N - 1).
pub fn sample_moments(s: &Sample) -> Result<Moments> {
    let n = s.n();
    if n < 3 {
        return Err(Error::TooFewRows { need: 3, got: n });
    }
    let d = s.d();
    let p = sym_dim(d);
    let (mean, xc) = centered(s);
    let cov = xc.tr_mul(&xc) / (n as f64 - 1.0);
    let v = dvech(&cov);

    let pairs = band_pairs(d);
    let mut w = DMatrix::zeros(n, p);
    for row in 0..n {
        for (col, &(a, b)) in pairs.iter().enumerate() {
            w[(row, col)] = xc[(row, a)] * xc[(row, b)];
        }
    }
    let wbar = w.row_mean();
    for row in 0..n {
        for col in 0..p {
            w[(row, col)] -= wbar[col];
        }
    }
    let sigma_dv = w.tr_mul(&w) / (n as f64 - 1.0);
    Ok(Moments { mean, cov, v, sigma_dv })
}

/// Correlation matrix and its strict bands-first vectorization.
pub fn corr_from_cov(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = cov.nrows();
    let mut sd = DVector::zeros(d);
    for i in 0..d {
        if !(cov[(i, i)] > 0.0) {
            return Err(Error::NonpositiveDiagonal { index: i });
        }
        sd[i] = cov[(i, i)].sqrt();
    }
    let corr = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    });
    let r = dvech_strict(&corr);
    Ok((corr, r))
}

/// Jacobian of the covariance-to-correlation map in bands-first
/// coordinates: rows indexed by strict pairs, columns by full pairs.
///
/// For the pair (i, j): d r_ij / d v_ij = (v_ii v_jj)^{-1/2},
/// d r_ij / d v_ii = -r_ij / (2 v_ii), d r_ij / d v_jj = -r_ij / (2 v_jj).
pub fn corr_jacobian(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    for i in 0..d {
        if !(cov[(i, i)] > 0.0) {
            return Err(Error::NonpositiveDiagonal { index: i });
        }
    }
    let mut m = DMatrix::zeros(strict_dim(d), sym_dim(d));
    for (row, &(i, j)) in strict_band_pairs(d).iter().enumerate() {
        let vii = cov[(i, i)];
        let vjj = cov[(j, j)];
        let rij = cov[(i, j)] / (vii * vjj).sqrt();
        m[(row, band_index(d, i, j))] = 1.0 / (vii * vjj).sqrt();
        m[(row, band_index(d, i, i))] = -rij / (2.0 * vii);
        m[(row, band_index(d, j, j))] = -rij / (2.0 * vjj);
    }
    Ok(m)
}

/// Correlation-level moments: the correlation vector and its delta-method
/// covariance M Sigma M^T.
pub fn corr_moments(m: &Moments) -> Result<CorrMoments> {
    let (corr, r) = corr_from_cov(&m.cov)?;
    let jac = corr_jacobian(&m.cov)?;
    let upsilon = &jac * &m.sigma_dv * jac.transpose();
    // the triple product loses exact symmetry; restore it
    let upsilon_dv = (&upsilon + upsilon.transpose()) * 0.5;
    Ok(CorrMoments { corr, r, upsilon_dv })
}
