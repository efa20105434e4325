//! Bands-first vectorization of symmetric matrices and small matrix helpers.
//!
//! A symmetric `d x d` matrix is flattened into a vector that starts with the
//! `d` diagonal entries, followed by the first superdiagonal (`d - 1`
//! entries), the second (`d - 2`), down to the single corner entry. This
//! layout keeps every band of the matrix contiguous, which is what the band
//! transforms and the structural contrast matrices operate on. The strict
//! variant skips the diagonal and is used for correlation matrices.
//!
//! The classical row-major half-vectorization (`vech`) is also provided,
//! together with the permutation matrices connecting the two layouts.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of entries on and above the diagonal, d(d+1)/2.
pub fn sym_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Number of entries strictly above the diagonal, d(d-1)/2.
pub fn strict_dim(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Start offset of each band segment in the bands-first layout.
///
/// Entry `k` is the offset of the k-th superdiagonal (0 = main diagonal);
/// the segment has length `d - k`.
pub fn band_starts(d: usize) -> Vec<usize> {
    let mut starts = Vec::with_capacity(d);
    let mut acc = 0;
    for k in 0..d {
        starts.push(acc);
        acc += d - k;
    }
    starts
}

/// Band segment starts for the strict (diagonal-free) layout.
///
/// Entry `k` is the offset of superdiagonal `k + 1`, of length `d - 1 - k`.
pub fn strict_band_starts(d: usize) -> Vec<usize> {
    let mut starts = Vec::with_capacity(d.saturating_sub(1));
    let mut acc = 0;
    for k in 1..d {
        starts.push(acc);
        acc += d - k;
    }
    starts
}

/// Position of entry (i, j), i <= j, in the bands-first layout.
pub fn band_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    let lag = j - i;
    // offset of band `lag` plus position within the band
    band_starts(d)[lag] + i
}

/// Position of entry (i, j), i < j, in the strict bands-first layout.
pub fn strict_band_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    strict_band_starts(d)[j - i - 1] + i
}

/// (row, column) index pairs in bands-first order.
pub fn band_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(sym_dim(d));
    for lag in 0..d {
        for i in 0..d - lag {
            pairs.push((i, i + lag));
        }
    }
    pairs
}

/// (row, column) index pairs in strict bands-first order.
pub fn strict_band_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(strict_dim(d));
    for lag in 1..d {
        for i in 0..d - lag {
            pairs.push((i, i + lag));
        }
    }
    pairs
}

/// Bands-first vectorization of the upper triangle of a square matrix.
pub fn dvech(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    DVector::from_iterator(sym_dim(d), band_pairs(d).into_iter().map(|(i, j)| m[(i, j)]))
}

/// Strict bands-first vectorization (diagonal omitted).
pub fn dvech_strict(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    DVector::from_iterator(
        strict_dim(d),
        strict_band_pairs(d).into_iter().map(|(i, j)| m[(i, j)]),
    )
}

/// Rebuild the symmetric matrix from its bands-first vectorization.
pub fn dvech_inv(y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let p = y.len();
    // invert p = d(d+1)/2
    let d = ((((8 * p + 1) as f64).sqrt() as usize) - 1) / 2;
    if sym_dim(d) != p {
        return Err(Error::Dim {
            what: "bands-first vector length",
            expected: sym_dim(d),
            got: p,
        });
    }
    let mut m = DMatrix::zeros(d, d);
    for (k, (i, j)) in band_pairs(d).into_iter().enumerate() {
        m[(i, j)] = y[k];
        m[(j, i)] = y[k];
    }
    Ok(m)
}

/// Row-major half-vectorization of the upper triangle, diagonal included.
pub fn vech(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    let mut out = Vec::with_capacity(sym_dim(d));
    for i in 0..d {
        for j in i..d {
            out.push(m[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Row-major vectorization of the strict upper triangle.
pub fn vech_strict(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    let mut out = Vec::with_capacity(strict_dim(d));
    for i in 0..d {
        for j in i + 1..d {
            out.push(m[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Permutation matrix mapping the row-major layout onto the bands-first one:
/// `vech_to_dvech(d) * vech(M) == dvech(M)`.
pub fn vech_to_dvech(d: usize) -> DMatrix<f64> {
    let p = sym_dim(d);
    let s = band_starts(d);
    let mut a = DMatrix::zeros(p, p);
    // Row i of the upper triangle starts at the same triangular offset as
    // band i, so the same start table serves both layouts.
    for lag in 0..d {
        for k in 0..d - lag {
            a[(s[lag] + k, s[k] + lag)] = 1.0;
        }
    }
    a
}

/// Strict-layout companion of [`vech_to_dvech`]:
/// `vech_to_dvech_strict(d) * vech_strict(M) == dvech_strict(M)`.
pub fn vech_to_dvech_strict(d: usize) -> DMatrix<f64> {
    let pu = strict_dim(d);
    let s = strict_band_starts(d);
    let mut a = DMatrix::zeros(pu, pu);
    for lag in 0..d.saturating_sub(1) {
        for k in 0..d - 1 - lag {
            a[(s[lag] + k, s[k] + lag)] = 1.0;
        }
    }
    a
}

/// Centering matrix I - J/n; maps a vector to its deviations from the mean.
pub fn centering(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(n, n, -1.0 / n as f64);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    m
}

/// Block-diagonal matrix assembled from the given blocks.
pub fn direct_sum(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending
/// with the eigenvector columns in matching order.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.column_mut(dst).copy_from(&se.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

/// Symmetric square root of a positive semi-definite matrix.
///
/// Eigenvalues in [-tol, 0) are clamped to zero, with tol = 1e-10 times the
/// largest absolute entry; anything below that fails.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m)?;
    let tol = 1e-10 * m.amax();
    let n = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let v = vals[k];
        if v < -tol {
            return Err(Error::NotPsd { min_eig: v, tol });
        }
        let root = v.max(0.0).sqrt();
        scaled.column_mut(k).scale_mut(root);
    }
    let s = &scaled * vecs.transpose();
    // exact symmetry, untouched by rounding in the reconstruction
    Ok(0.5 * (&s + s.transpose()))
}

/// Largest absolute asymmetry |m - m^T| of a square matrix.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
