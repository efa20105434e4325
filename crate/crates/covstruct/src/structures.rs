//! Constructors for structured covariance matrices.
//!
//! These serve as simulation ground truths and as fixtures for the
//! hypothesis tests: each structure generated under its own parameters lies
//! exactly in the null space of the matching contrast matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::sym_eigen;

/// A structured covariance model together with its parameters.
///
/// `band` for [`StructureKind::Toeplitz`] holds the d band values starting
/// at the diagonal; for [`StructureKind::HeteroToeplitz`] it holds the d - 1
/// correlation bands for lags 1 to d - 1 (the diagonal of a correlation
/// matrix is fixed at one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", content = "params")]
pub enum StructureKind {
    #[serde(rename = "diagonal")]
    Diagonal { variances: Vec<f64> },
    #[serde(rename = "sphericity")]
    Spherical { scale: f64 },
    #[serde(rename = "compound-symmetry")]
    CompoundSymmetry { diag: f64, offdiag: f64 },
    #[serde(rename = "toeplitz")]
    Toeplitz { band: Vec<f64> },
    #[serde(rename = "ar")]
    Ar { rho: f64 },
    #[serde(rename = "foar")]
    Foar { scale: f64, rho: f64 },
    #[serde(rename = "h-cs")]
    HeteroCs { corr: f64, scales: Vec<f64> },
    #[serde(rename = "h-toeplitz")]
    HeteroToeplitz { band: Vec<f64>, scales: Vec<f64> },
    #[serde(rename = "h-ar")]
    HeteroAr { rho: f64, scales: Vec<f64> },
}

impl StructureKind {
    /// Stable name, matching the CLI and scenario-file vocabulary.
    pub fn name(&self) -> &'static str {
        match self {
            StructureKind::Diagonal { .. } => "diagonal",
            StructureKind::Spherical { .. } => "sphericity",
            StructureKind::CompoundSymmetry { .. } => "compound-symmetry",
            StructureKind::Toeplitz { .. } => "toeplitz",
            StructureKind::Ar { .. } => "ar",
            StructureKind::Foar { .. } => "foar",
            StructureKind::HeteroCs { .. } => "h-cs",
            StructureKind::HeteroToeplitz { .. } => "h-toeplitz",
            StructureKind::HeteroAr { .. } => "h-ar",
        }
    }
}

fn check_scales(scales: &[f64], d: usize) -> Result<()> {
    if scales.len() != d {
        return Err(Error::Dim {
            what: "scales",
            expected: d,
            got: scales.len(),
        });
    }
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParam("scales must be positive and finite".into()));
    }
    Ok(())
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let (vals, _) = sym_eigen(m)?;
    let tol = 1e-10 * m.amax();
    let min = vals[vals.len() - 1];
    if min < -tol {
        return Err(Error::NotPsd { min_eig: min, tol });
    }
    Ok(())
}

fn toeplitz_from_band(band: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| band[i.abs_diff(j)])
}

/// Scale a correlation matrix by per-coordinate standard deviations.
fn scale_corr(corr: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(corr.nrows(), corr.ncols(), |i, j| scales[i] * scales[j] * corr[(i, j)])
}

/// Build the d x d covariance matrix for a structure.
pub fn make_structure(kind: &StructureKind, d: usize) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::InvalidParam(format!("dimension must be at least 2, got {d}")));
    }
    match kind {
        StructureKind::Diagonal { variances } => {
            if variances.len() != d {
                return Err(Error::Dim {
                    what: "variances",
                    expected: d,
                    got: variances.len(),
                });
            }
            if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParam("variances must be positive and finite".into()));
            }
            Ok(DMatrix::from_fn(d, d, |i, j| if i == j { variances[i] } else { 0.0 }))
        }
        StructureKind::Spherical { scale } => {
            if !(*scale > 0.0) || !scale.is_finite() {
                return Err(Error::InvalidParam("scale must be positive and finite".into()));
            }
            Ok(DMatrix::identity(d, d) * *scale)
        }
        StructureKind::CompoundSymmetry { diag, offdiag } => {
            if !(*diag > 0.0) || !diag.is_finite() || !offdiag.is_finite() {
                return Err(Error::InvalidParam("diagonal must be positive and finite".into()));
            }
            // PSD range for equal off-diagonals
            let lower = -diag / (d as f64 - 1.0);
            if *offdiag <= lower || *offdiag >= *diag {
                return Err(Error::InvalidParam(format!(
                    "off-diagonal {offdiag} outside ({lower}, {diag}) for dimension {d}"
                )));
            }
            Ok(DMatrix::from_fn(d, d, |i, j| if i == j { *diag } else { *offdiag }))
        }
        StructureKind::Toeplitz { band } => {
            if band.len() != d {
                return Err(Error::Dim {
                    what: "band",
                    expected: d,
                    got: band.len(),
                });
            }
            if !(band[0] > 0.0) || band.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("band must be finite with positive diagonal".into()));
            }
            let m = toeplitz_from_band(band, d);
            check_psd(&m)?;
            Ok(m)
        }
        StructureKind::Ar { rho } => {
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(Error::InvalidParam(format!("rho must be in (0, 1), got {rho}")));
            }
            Ok(DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32)))
        }
        StructureKind::Foar { scale, rho } => {
            if !(*scale > 0.0) || !scale.is_finite() {
                return Err(Error::InvalidParam("scale must be positive and finite".into()));
            }
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(Error::InvalidParam(format!("rho must be in (0, 1), got {rho}")));
            }
            Ok(DMatrix::from_fn(d, d, |i, j| scale * rho.powi(i.abs_diff(j) as i32)))
        }
        StructureKind::HeteroCs { corr, scales } => {
            check_scales(scales, d)?;
            let lower = -1.0 / (d as f64 - 1.0);
            if *corr <= lower || *corr >= 1.0 {
                return Err(Error::InvalidParam(format!(
                    "correlation {corr} outside ({lower}, 1) for dimension {d}"
                )));
            }
            let core = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { *corr });
            Ok(scale_corr(&core, scales))
        }
        StructureKind::HeteroToeplitz { band, scales } => {
            check_scales(scales, d)?;
            if band.len() != d - 1 {
                return Err(Error::Dim {
                    what: "correlation band",
                    expected: d - 1,
                    got: band.len(),
                });
            }
            if band.iter().any(|v| !v.is_finite() || v.abs() >= 1.0) {
                return Err(Error::InvalidParam("correlation bands must lie in (-1, 1)".into()));
            }
            let mut full = Vec::with_capacity(d);
            full.push(1.0);
            full.extend_from_slice(band);
            let core = toeplitz_from_band(&full, d);
            check_psd(&core)?;
            Ok(scale_corr(&core, scales))
        }
        StructureKind::HeteroAr { rho, scales } => {
            check_scales(scales, d)?;
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(Error::InvalidParam(format!("rho must be in (0, 1), got {rho}")));
            }
            let core = DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32));
            Ok(scale_corr(&core, scales))
        }
    }
}

/// Convex combination (1 - t) a + t b of two covariance matrices.
pub fn mixture(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Dim {
            what: "mixture operands",
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParam(format!("mixture weight must be in [0, 1], got {t}")));
    }
    Ok(a * (1.0 - t) + b * t)
}
