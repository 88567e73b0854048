//! Rank truncation, truncated pseudo-inverse, and minimum-norm least squares
//! on top of the SVD.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::matrix::RealMatrix;
use crate::linalg::svd::{svd, SvdFactors};

/// Default cutoff below which a singular value is treated as zero when
/// inverting: `1e-10` relative to the largest singular value.
pub fn default_zero_tol(f: &SvdFactors) -> f64 {
    1e-10 * f.singular_values.first().copied().unwrap_or(0.0)
}

/// Rank-`k` truncation `Σ_{ℓ≤k} s_ℓ u_ℓ v_ℓᵀ`.
///
/// `k = 0` returns the zero matrix; `k` above the number of singular values
/// is a range error.
pub fn truncate(f: &SvdFactors, k: usize) -> Result<RealMatrix> {
    if k > f.len() {
        return Err(Error::RankOutOfRange {
            requested: k,
            max: f.len(),
        });
    }
    Ok(f.reconstruct_rank(k))
}

/// Truncated Moore-Penrose pseudo-inverse `Σ_{ℓ≤k, s_ℓ>zero_tol} v_ℓ u_ℓᵀ / s_ℓ`.
///
/// Singular values at or below `zero_tol` are skipped, not inverted.
pub fn truncated_pinv(f: &SvdFactors, k: usize, zero_tol: f64) -> Result<RealMatrix> {
    if k > f.len() {
        return Err(Error::RankOutOfRange {
            requested: k,
            max: f.len(),
        });
    }
    let m = f.left.rows();
    let n = f.right.rows();
    let mut out = RealMatrix::zeros(n, m);
    for l in 0..k {
        let s = f.singular_values[l];
        if s <= zero_tol {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..n {
            let vi = inv * f.right.get(i, l);
            if vi == 0.0 {
                continue;
            }
            for j in 0..m {
                out.set(i, j, out.get(i, j) + vi * f.left.get(j, l));
            }
        }
    }
    Ok(out)
}

/// Least-squares solution of `x · β = y` with minimum Euclidean norm,
/// computed through the full truncated pseudo-inverse.
pub fn min_norm_least_squares(x: &RealMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    let f = svd(x)?;
    let pinv = truncated_pinv(&f, f.len(), default_zero_tol(&f))?;
    pinv.matvec(y)
}

/// Max-entrywise error of the best rank-`r` (Frobenius-optimal)
/// approximation of `m`. Nonincreasing in `r`.
pub fn rank_r_max_error(m: &RealMatrix, r: usize) -> Result<f64> {
    let f = svd(m)?;
    let approx = truncate(&f, r)?;
    m.max_abs_diff(&approx)
}
