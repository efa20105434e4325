//! Hypothesis matrices, target vectors, and band transforms.
//!
//! A structural hypothesis on a covariance (or correlation) matrix is encoded
//! as `C * T(x) = zeta`, where `x` is the bands-first vectorization of the
//! matrix, `T` an optional nonlinear transform, and `C` a projection-style
//! contrast matrix.  Autoregressive proportionality is linearized either by
//! taking lag-order roots of each band ([`band_root`]) or by taking ratios of
//! neighbouring band means and stacking them under the raw vector
//! ([`with_band_ratios`]).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mat::{band_starts, centering, direct_sum, strict_band_starts, strict_dim, sym_dim};
use crate::structures::StructureKind;

/// Whether a hypothesis constrains the covariance matrix itself or the
/// correlation matrix derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "cov")]
    Covariance,
    #[serde(rename = "corr")]
    Correlation,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Covariance => "cov",
            Domain::Correlation => "corr",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cov" | "covariance" => Ok(Domain::Covariance),
            "corr" | "correlation" => Ok(Domain::Correlation),
            other => Err(Error::InvalidParam(format!("unknown domain {other:?}, expected cov or corr"))),
        }
    }
}

/// Linearization used for the autoregressive hypothesis: per-band roots
/// (`h`) or stacked ratios of band means (`g`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "h")]
    Root,
    #[serde(rename = "g")]
    Ratio,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Root => "h",
            Variant::Ratio => "g",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "root" => Ok(Variant::Root),
            "g" | "ratio" => Ok(Variant::Ratio),
            other => Err(Error::InvalidParam(format!("unknown variant {other:?}, expected h or g"))),
        }
    }
}

/// Structural null hypothesis selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisKind {
    #[serde(rename = "diagonal")]
    Diagonal,
    #[serde(rename = "sphericity")]
    Spherical,
    #[serde(rename = "compound-symmetry")]
    CompoundSymmetry,
    #[serde(rename = "toeplitz")]
    Toeplitz,
    #[serde(rename = "ar")]
    Autoregressive,
    #[serde(rename = "foar")]
    FirstOrderAutoregressive,
    #[serde(rename = "h-cs")]
    HeteroCompoundSymmetry,
    #[serde(rename = "h-toeplitz")]
    HeteroToeplitz,
    #[serde(rename = "h-ar")]
    HeteroAutoregressive,
}

impl HypothesisKind {
    pub fn name(self) -> &'static str {
        match self {
            HypothesisKind::Diagonal => "diagonal",
            HypothesisKind::Spherical => "sphericity",
            HypothesisKind::CompoundSymmetry => "compound-symmetry",
            HypothesisKind::Toeplitz => "toeplitz",
            HypothesisKind::Autoregressive => "ar",
            HypothesisKind::FirstOrderAutoregressive => "foar",
            HypothesisKind::HeteroCompoundSymmetry => "h-cs",
            HypothesisKind::HeteroToeplitz => "h-toeplitz",
            HypothesisKind::HeteroAutoregressive => "h-ar",
        }
    }

    /// Domain the hypothesis is naturally phrased in.  Diagonality is
    /// meaningful in both; the heterogeneous structures only constrain the
    /// correlation matrix, everything else the covariance matrix.
    pub fn default_domain(self) -> Domain {
        match self {
            HypothesisKind::HeteroCompoundSymmetry
            | HypothesisKind::HeteroToeplitz
            | HypothesisKind::HeteroAutoregressive => Domain::Correlation,
            _ => Domain::Covariance,
        }
    }

    /// Hypothesis matching a data-generating structure.
    pub fn for_structure(kind: &StructureKind) -> HypothesisKind {
        match kind {
            StructureKind::Diagonal { .. } => HypothesisKind::Diagonal,
            StructureKind::Spherical { .. } => HypothesisKind::Spherical,
            StructureKind::CompoundSymmetry { .. } => HypothesisKind::CompoundSymmetry,
            StructureKind::Toeplitz { .. } => HypothesisKind::Toeplitz,
            StructureKind::Ar { .. } => HypothesisKind::Autoregressive,
            StructureKind::Foar { .. } => HypothesisKind::FirstOrderAutoregressive,
            StructureKind::HeteroCs { .. } => HypothesisKind::HeteroCompoundSymmetry,
            StructureKind::HeteroToeplitz { .. } => HypothesisKind::HeteroToeplitz,
            StructureKind::HeteroAr { .. } => HypothesisKind::HeteroAutoregressive,
        }
    }
}

impl fmt::Display for HypothesisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HypothesisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(HypothesisKind::Diagonal),
            "sphericity" => Ok(HypothesisKind::Spherical),
            "compound-symmetry" => Ok(HypothesisKind::CompoundSymmetry),
            "toeplitz" => Ok(HypothesisKind::Toeplitz),
            "ar" => Ok(HypothesisKind::Autoregressive),
            "foar" => Ok(HypothesisKind::FirstOrderAutoregressive),
            "h-cs" => Ok(HypothesisKind::HeteroCompoundSymmetry),
            "h-toeplitz" => Ok(HypothesisKind::HeteroToeplitz),
            "h-ar" => Ok(HypothesisKind::HeteroAutoregressive),
            other => Err(Error::InvalidParam(format!("unknown hypothesis {other:?}"))),
        }
    }
}

/// Nonlinear map applied to the vectorized matrix before the contrast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    /// No transform; the contrast acts on the raw vector.
    Identity,
    /// Lag-order roots per band of a full bands-first vector.
    BandRoot,
    /// Lag-order roots per band of a strict (diagonal-free) vector.
    BandRootStrict,
    /// The raw vector with the band-mean ratios appended.
    RatioStacked,
}

/// A built hypothesis: contrast matrix, target, transform, and domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub c: DMatrix<f64>,
    pub zeta: DVector<f64>,
    pub transform: TransformKind,
    pub domain: Domain,
    pub d: usize,
}

impl Hypothesis {
    /// Length of the vectorized input the hypothesis applies to.
    pub fn input_len(&self) -> usize {
        match self.domain {
            Domain::Covariance => sym_dim(self.d),
            Domain::Correlation => strict_dim(self.d),
        }
    }

    /// Length of the transformed vector the contrast acts on.
    pub fn transformed_len(&self) -> usize {
        match self.transform {
            TransformKind::RatioStacked => sym_dim(self.d) + self.d - 1,
            _ => self.input_len(),
        }
    }

    /// Copy with exactly-zero rows of `C` (and the matching target entries)
    /// removed.  The test statistic is unchanged: zero rows contribute
    /// nothing to either the numerator or the trace.
    pub fn pruned(&self) -> Hypothesis {
        let keep: Vec<usize> = (0..self.c.nrows())
            .filter(|&r| self.c.row(r).iter().any(|&x| x != 0.0))
            .collect();
        let c = DMatrix::from_fn(keep.len(), self.c.ncols(), |r, col| self.c[(keep[r], col)]);
        let zeta = DVector::from_iterator(keep.len(), keep.iter().map(|&r| self.zeta[r]));
        Hypothesis {
            c,
            zeta,
            transform: self.transform,
            domain: self.domain,
            d: self.d,
        }
    }

    /// Apply the hypothesis transform to a vectorized matrix.
    pub fn transformed(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        apply_transform(self.transform, x, self.d)
    }

    /// Jacobian of the transform at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        transform_jacobian(self.transform, x, self.d)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Dim {
                what: "vectorized input",
                expected: self.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Apply a transform to a bands-first vector of dimension-`d` origin.
pub fn apply_transform(t: TransformKind, x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    match t {
        TransformKind::Identity => Ok(x.clone()),
        TransformKind::BandRoot => band_root(x, d),
        TransformKind::BandRootStrict => band_root_strict(x, d),
        TransformKind::RatioStacked => with_band_ratios(x, d),
    }
}

/// Jacobian of a transform at `x`.
pub fn transform_jacobian(t: TransformKind, x: &DVector<f64>, d: usize) -> Result<DMatrix<f64>> {
    match t {
        TransformKind::Identity => Ok(DMatrix::identity(x.len(), x.len())),
        TransformKind::BandRoot => Ok(DMatrix::from_diagonal(&band_root_jacobian_diag(x, d)?)),
        TransformKind::BandRootStrict => {
            Ok(DMatrix::from_diagonal(&band_root_strict_jacobian_diag(x, d)?))
        }
        TransformKind::RatioStacked => {
            let p = sym_dim(d);
            let jg = band_ratio_jacobian(x, d)?;
            let mut j = DMatrix::zeros(p + d - 1, p);
            j.view_mut((0, 0), (p, p)).fill_with_identity();
            j.view_mut((p, 0), (d - 1, p)).copy_from(&jg);
            Ok(j)
        }
    }
}

/// Signed root of order `order`; even orders use the absolute value so the
/// map stays real on sign-flipped inputs.
fn root_value(order: usize, x: f64) -> f64 {
    let mag = x.abs().powf(1.0 / order as f64);
    if order % 2 == 1 && x < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Derivative of [`root_value`] with respect to x, undefined at zero.
fn root_derivative(order: usize, x: f64) -> f64 {
    let m = order as f64;
    let mag = x.abs().powf((1.0 - m) / m) / m;
    // odd-order roots are increasing everywhere; even orders flip slope sign
    if order % 2 == 0 && x < 0.0 {
        -mag
    } else {
        mag
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_len(x: &DVector<f64>, expected: usize, what: &'static str) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dim {
            what,
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Entrywise lag-order roots: the diagonal and first superdiagonal pass
/// through, band `lag >= 2` maps to its lag-th root.  Under an AR structure
/// with coefficient rho every band then equals rho.
pub fn band_root(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, sym_dim(d), "bands-first vector")?;
    let starts = band_starts(d);
    let mut out = x.clone();
    for lag in 2..d {
        for k in 0..d - lag {
            let i = starts[lag] + k;
            out[i] = root_value(lag, x[i]);
        }
    }
    Ok(out)
}

/// Diagonal of the Jacobian of [`band_root`].
pub fn band_root_jacobian_diag(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, sym_dim(d), "bands-first vector")?;
    let starts = band_starts(d);
    let mut diag = DVector::from_element(x.len(), 1.0);
    for lag in 2..d {
        for k in 0..d - lag {
            let i = starts[lag] + k;
            if x[i] == 0.0 {
                return Err(Error::RootSegmentZero { index: i });
            }
            diag[i] = root_derivative(lag, x[i]);
        }
    }
    Ok(diag)
}

/// [`band_root`] for strict (diagonal-free) vectors.
pub fn band_root_strict(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, strict_dim(d), "strict bands-first vector")?;
    let starts = strict_band_starts(d);
    let mut out = x.clone();
    for lag in 2..d {
        for k in 0..d - lag {
            let i = starts[lag - 1] + k;
            out[i] = root_value(lag, x[i]);
        }
    }
    Ok(out)
}

/// Diagonal of the Jacobian of [`band_root_strict`].
pub fn band_root_strict_jacobian_diag(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, strict_dim(d), "strict bands-first vector")?;
    let starts = strict_band_starts(d);
    let mut diag = DVector::from_element(x.len(), 1.0);
    for lag in 2..d {
        for k in 0..d - lag {
            let i = starts[lag - 1] + k;
            if x[i] == 0.0 {
                return Err(Error::RootSegmentZero { index: i });
            }
            diag[i] = root_derivative(lag, x[i]);
        }
    }
    Ok(diag)
}

/// Ratios of neighbouring band means: component `l` (1-based) is the mean of
/// band `l` divided by the mean absolute value of band `l - 1`.  Under an AR
/// structure every component equals the coefficient rho.
///
/// A zero denominator makes the ratio undefined; the matching band of the
/// underlying matrix is then zero, which already contradicts the structures
/// this transform serves, so callers turn [`Error::DegenerateRatio`] into a
/// rejection rather than a failure.
pub fn band_ratio(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, sym_dim(d), "bands-first vector")?;
    let starts = band_starts(d);
    let mut g = DVector::zeros(d - 1);
    for l in 1..d {
        let num_len = d - l;
        let den_len = d - l + 1;
        let num: f64 = (0..num_len).map(|k| x[starts[l] + k]).sum();
        let den: f64 = (0..den_len).map(|k| x[starts[l - 1] + k].abs()).sum();
        if den == 0.0 {
            return Err(Error::DegenerateRatio { band: l });
        }
        g[l - 1] = (den_len as f64 * num) / (num_len as f64 * den);
    }
    Ok(g)
}

/// Jacobian of [`band_ratio`], one row per ratio.
pub fn band_ratio_jacobian(x: &DVector<f64>, d: usize) -> Result<DMatrix<f64>> {
    check_len(x, sym_dim(d), "bands-first vector")?;
    let g = band_ratio(x, d)?;
    let starts = band_starts(d);
    let mut j = DMatrix::zeros(d - 1, x.len());
    for l in 1..d {
        let num_len = d - l;
        let den_len = d - l + 1;
        let den: f64 = (0..den_len).map(|k| x[starts[l - 1] + k].abs()).sum();
        for k in 0..num_len {
            j[(l - 1, starts[l] + k)] = den_len as f64 / (num_len as f64 * den);
        }
        for k in 0..den_len {
            let i = starts[l - 1] + k;
            j[(l - 1, i)] = -g[l - 1] * sgn(x[i]) / den;
        }
    }
    Ok(j)
}

/// The raw vector with its band-mean ratios appended.
pub fn with_band_ratios(x: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    check_len(x, sym_dim(d), "bands-first vector")?;
    let g = band_ratio(x, d)?;
    let mut out = DVector::zeros(x.len() + d - 1);
    out.rows_mut(0, x.len()).copy_from(x);
    out.rows_mut(x.len(), d - 1).copy_from(&g);
    Ok(out)
}

/// Centering blocks for the strict bands, longest first; the last block is
/// the 1x1 zero matrix.
fn strict_band_centerings(d: usize) -> Vec<DMatrix<f64>> {
    (1..d).map(|lag| centering(d - lag)).collect()
}

/// Build the contrast matrix, target, and transform for a hypothesis.
///
/// `variant` selects the autoregressive linearization and is ignored for
/// every other hypothesis (the first-order autoregressive test only exists
/// in ratio form).  The returned matrix is unpruned; engines typically call
/// [`Hypothesis::pruned`] before computing statistics.
pub fn build_hypothesis(
    kind: HypothesisKind,
    domain: Domain,
    variant: Variant,
    d: usize,
) -> Result<Hypothesis> {
    if d < 2 {
        return Err(Error::InvalidParam(format!("dimension must be at least 2, got {d}")));
    }
    let p = sym_dim(d);
    let pu = strict_dim(d);
    let build = |c: DMatrix<f64>, zeta: DVector<f64>, transform: TransformKind| Hypothesis {
        c,
        zeta,
        transform,
        domain,
        d,
    };
    match (kind, domain) {
        (HypothesisKind::Diagonal, Domain::Covariance) => {
            let c = direct_sum(&[DMatrix::zeros(d, d), DMatrix::identity(pu, pu)]);
            Ok(build(c, DVector::zeros(p), TransformKind::Identity))
        }
        (HypothesisKind::Diagonal, Domain::Correlation) => {
            let c = DMatrix::identity(pu, pu);
            Ok(build(c, DVector::zeros(pu), TransformKind::Identity))
        }
        (HypothesisKind::Spherical, Domain::Covariance) => {
            let c = direct_sum(&[centering(d), DMatrix::identity(pu, pu)]);
            Ok(build(c, DVector::zeros(p), TransformKind::Identity))
        }
        (HypothesisKind::CompoundSymmetry, Domain::Covariance) => {
            let c = direct_sum(&[centering(d), centering(pu)]);
            Ok(build(c, DVector::zeros(p), TransformKind::Identity))
        }
        (HypothesisKind::Toeplitz, Domain::Covariance) => {
            let blocks: Vec<DMatrix<f64>> = (0..d).map(|lag| centering(d - lag)).collect();
            Ok(build(direct_sum(&blocks), DVector::zeros(p), TransformKind::Identity))
        }
        (HypothesisKind::Autoregressive, Domain::Covariance) => match variant {
            Variant::Root => {
                let c = direct_sum(&[DMatrix::identity(d, d), centering(pu)]);
                let mut zeta = DVector::zeros(p);
                zeta.rows_mut(0, d).fill(1.0);
                Ok(build(c, zeta, TransformKind::BandRoot))
            }
            Variant::Ratio => {
                let mut blocks = vec![DMatrix::identity(d, d)];
                blocks.extend(strict_band_centerings(d));
                blocks.push(centering(d - 1));
                let c = direct_sum(&blocks);
                let mut zeta = DVector::zeros(p + d - 1);
                zeta.rows_mut(0, d).fill(1.0);
                Ok(build(c, zeta, TransformKind::RatioStacked))
            }
        },
        (HypothesisKind::FirstOrderAutoregressive, Domain::Covariance) => {
            let mut blocks: Vec<DMatrix<f64>> = (0..d).map(|lag| centering(d - lag)).collect();
            blocks.push(centering(d - 1));
            let c = direct_sum(&blocks);
            Ok(build(c, DVector::zeros(p + d - 1), TransformKind::RatioStacked))
        }
        (HypothesisKind::HeteroCompoundSymmetry, Domain::Correlation) => {
            Ok(build(centering(pu), DVector::zeros(pu), TransformKind::Identity))
        }
        (HypothesisKind::HeteroToeplitz, Domain::Correlation) => {
            let c = direct_sum(&strict_band_centerings(d));
            Ok(build(c, DVector::zeros(pu), TransformKind::Identity))
        }
        (HypothesisKind::HeteroAutoregressive, Domain::Correlation) => {
            Ok(build(centering(pu), DVector::zeros(pu), TransformKind::BandRootStrict))
        }
        (kind, domain) => Err(Error::Unsupported(format!(
            "{} hypothesis in the {} domain",
            kind.name(),
            domain.name()
        ))),
    }
}
