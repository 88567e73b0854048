//! Singular value decomposition via Householder bidiagonalization followed
//! by implicit-shift (Golub-Kahan) QR on the bidiagonal.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::matrix::RealMatrix;
use crate::math;

/// Compact SVD factors: `source = left · diag(singular_values) · rightᵀ`.
///
/// Singular values are sorted nonincreasing. `left` is `m × k` and `right`
/// is `n × k` with `k = min(m, n)`; both have orthonormal columns. Each
/// factor pair is sign-normalized so the first nonzero entry of the left
/// singular vector is nonnegative, which makes the factorization
/// deterministic across runs.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    pub left: RealMatrix,
    pub right: RealMatrix,
}

impl SvdFactors {
    /// Number of singular values, `min(rows, cols)` of the source.
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Rank-`k` partial reconstruction `Σ_{ℓ<k} s_ℓ u_ℓ v_ℓᵀ`.
    pub fn reconstruct_rank(&self, k: usize) -> RealMatrix {
        let m = self.left.rows();
        let n = self.right.rows();
        let mut out = RealMatrix::zeros(m, n);
        for l in 0..k.min(self.len()) {
            let s = self.singular_values[l];
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = s * self.left.get(i, l);
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.set(i, j, out.get(i, j) + ui * self.right.get(j, l));
                }
            }
        }
        out
    }

    /// Full reconstruction from all factors.
    pub fn reconstruct(&self) -> RealMatrix {
        self.reconstruct_rank(self.len())
    }
}

/// Compute the compact SVD of a nonempty matrix.
pub fn svd(m: &RealMatrix) -> Result<SvdFactors> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let f = svd_tall(&m.transpose())?;
        Ok(SvdFactors {
            singular_values: f.singular_values,
            left: f.right,
            right: f.left,
        })
    }
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64) {
    let r = math::hypot(a, b);
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

/// SVD of a tall matrix (rows ≥ cols).
fn svd_tall(a: &RealMatrix) -> Result<SvdFactors> {
    let m = a.rows();
    let n = a.cols();

    // Scale so absolute tolerances inside the iteration are scale-free.
    let amax = a.max_abs();
    if amax == 0.0 {
        let mut left = RealMatrix::zeros(m, n);
        for j in 0..n {
            left.set(j, j, 1.0);
        }
        return Ok(SvdFactors {
            singular_values: vec![0.0; n],
            left,
            right: RealMatrix::identity(n),
        });
    }
    let mut work = a.scale(1.0 / amax);

    let mut u = RealMatrix::identity(m);
    let mut v = RealMatrix::identity(n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];

    bidiagonalize(&mut work, &mut diag, &mut off, &mut u, &mut v);
    bidiagonal_qr(&mut diag, &mut off, &mut u, &mut v)?;

    // Flip negative singular values into the left vectors.
    for l in 0..n {
        if diag[l] < 0.0 {
            diag[l] = -diag[l];
            for i in 0..m {
                u.set(i, l, -u.get(i, l));
            }
        }
    }

    // Sort descending, permuting U and V columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let mut singular_values = Vec::with_capacity(n);
    let mut left = RealMatrix::zeros(m, n);
    let mut right = RealMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(diag[src] * amax);
        for i in 0..m {
            left.set(i, dst, u.get(i, src));
        }
        for i in 0..n {
            right.set(i, dst, v.get(i, src));
        }
    }

    // Sign convention: first nonzero entry of each left vector nonnegative.
    for l in 0..n {
        let col_max = (0..m).fold(0.0f64, |acc, i| acc.max(math::abs(left.get(i, l))));
        let pivot = (0..m).find(|&i| math::abs(left.get(i, l)) > 1e-12 * col_max);
        if let Some(p) = pivot {
            if left.get(p, l) < 0.0 {
                for i in 0..m {
                    left.set(i, l, -left.get(i, l));
                }
                for i in 0..n {
                    right.set(i, l, -right.get(i, l));
                }
            }
        }
    }

    Ok(SvdFactors {
        singular_values,
        left,
        right,
    })
}

/// Householder reduction of `a` (m × n, m ≥ n) to upper bidiagonal form.
/// The diagonal lands in `diag`, the superdiagonal in `off`, and the
/// orthogonal transforms accumulate into `u` (m × m) and `v` (n × n) so
/// that `a = u · B · vᵀ`.
fn bidiagonalize(
    a: &mut RealMatrix,
    diag: &mut [f64],
    off: &mut [f64],
    u: &mut RealMatrix,
    v: &mut RealMatrix,
) {
    let m = a.rows();
    let n = a.cols();
    let mut hv = vec![0.0; m.max(n)];

    for k in 0..n {
        // Left reflector zeroing a[k+1.., k].
        let mut norm_sq = 0.0;
        for i in k..m {
            norm_sq += a.get(i, k) * a.get(i, k);
        }
        if norm_sq > 0.0 {
            let norm = math::sqrt(norm_sq);
            let x0 = a.get(k, k);
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            hv[k] = x0 - alpha;
            for i in (k + 1)..m {
                hv[i] = a.get(i, k);
            }
            let beta = 1.0 / (alpha * hv[k]); // = -2 / vᵀv
            diag[k] = alpha;

            for j in (k + 1)..n {
                let mut s = 0.0;
                for i in k..m {
                    s += hv[i] * a.get(i, j);
                }
                s *= beta;
                for i in k..m {
                    a.set(i, j, a.get(i, j) + s * hv[i]);
                }
            }
            for row in 0..m {
                let mut s = 0.0;
                for i in k..m {
                    s += u.get(row, i) * hv[i];
                }
                s *= beta;
                for i in k..m {
                    u.set(row, i, u.get(row, i) + s * hv[i]);
                }
            }
        } else {
            diag[k] = 0.0;
        }

        // Right reflector zeroing a[k, k+2..].
        if k + 2 < n {
            let mut norm_sq = 0.0;
            for j in (k + 1)..n {
                norm_sq += a.get(k, j) * a.get(k, j);
            }
            if norm_sq > 0.0 {
                let norm = math::sqrt(norm_sq);
                let x0 = a.get(k, k + 1);
                let alpha = if x0 >= 0.0 { -norm } else { norm };
                hv[k + 1] = x0 - alpha;
                for j in (k + 2)..n {
                    hv[j] = a.get(k, j);
                }
                let beta = 1.0 / (alpha * hv[k + 1]);
                off[k] = alpha;

                for i in (k + 1)..m {
                    let mut s = 0.0;
                    for j in (k + 1)..n {
                        s += hv[j] * a.get(i, j);
                    }
                    s *= beta;
                    for j in (k + 1)..n {
                        a.set(i, j, a.get(i, j) + s * hv[j]);
                    }
                }
                for row in 0..n {
                    let mut s = 0.0;
                    for j in (k + 1)..n {
                        s += v.get(row, j) * hv[j];
                    }
                    s *= beta;
                    for j in (k + 1)..n {
                        v.set(row, j, v.get(row, j) + s * hv[j]);
                    }
                }
            } else {
                off[k] = 0.0;
            }
        } else if k + 1 < n {
            off[k] = a.get(k, k + 1);
        }
    }
}

/// Implicit-shift QR on the bidiagonal, chasing the bulge down while
/// accumulating the rotations into `u` and `v`.
fn bidiagonal_qr(
    diag: &mut [f64],
    off: &mut [f64],
    u: &mut RealMatrix,
    v: &mut RealMatrix,
) -> Result<()> {
    let n = diag.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let max_iter = 40 * n * n + 200;
    let mut iter = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // Deflate converged trailing entries.
        let threshold = eps * (math::abs(diag[hi - 1]) + math::abs(diag[hi]));
        if math::abs(off[hi - 1]) <= threshold {
            off[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }

        // Find the start of the unreduced block ending at hi.
        let mut lo = hi - 1;
        while lo > 0 {
            let t = eps * (math::abs(diag[lo - 1]) + math::abs(diag[lo]));
            if math::abs(off[lo - 1]) <= t {
                off[lo - 1] = 0.0;
                break;
            }
            lo -= 1;
        }

        iter += 1;
        if iter > max_iter {
            return Err(Error::ConvergenceFailure);
        }

        // A (near-)zero diagonal inside the block breaks the shift; chase
        // the neighboring off-diagonal entry away with left rotations.
        let mut split = false;
        for idx in lo..hi {
            if math::abs(diag[idx]) <= eps * (math::abs(off[idx]) + math::abs(diag[idx + 1])) {
                diag[idx] = 0.0;
                let mut z = off[idx];
                off[idx] = 0.0;
                for j in (idx + 1)..=hi {
                    let (c, s) = givens(diag[j], z);
                    diag[j] = c * diag[j] + s * z;
                    if j < hi {
                        z = -s * off[j];
                        off[j] *= c;
                    }
                    rotate_columns(u, j, idx, c, s);
                }
                split = true;
                break;
            }
        }
        if split {
            continue;
        }

        // Wilkinson shift from the trailing 2×2 of BᵀB.
        let d_hi = diag[hi];
        let d_hi1 = diag[hi - 1];
        let e_hi1 = off[hi - 1];
        let e_hi2 = if hi >= 2 && hi - 2 >= lo {
            off[hi - 2]
        } else {
            0.0
        };
        let t11 = d_hi1 * d_hi1 + e_hi2 * e_hi2;
        let t12 = d_hi1 * e_hi1;
        let t22 = d_hi * d_hi + e_hi1 * e_hi1;
        let d = (t11 - t22) / 2.0;
        let denom = d + if d >= 0.0 { 1.0 } else { -1.0 } * math::sqrt(d * d + t12 * t12);
        let mu = if denom != 0.0 {
            t22 - t12 * t12 / denom
        } else {
            t22
        };

        // Bulge chase.
        let mut x = diag[lo] * diag[lo] - mu;
        let mut z = diag[lo] * off[lo];
        for k in lo..hi {
            let (c, s) = givens(x, z);
            if k > lo {
                off[k - 1] = c * x + s * z;
            }

            let dk = diag[k];
            let ek = off[k];
            let dk1 = diag[k + 1];
            diag[k] = c * dk + s * ek;
            off[k] = c * ek - s * dk;
            let bulge = s * dk1;
            diag[k + 1] = c * dk1;
            rotate_columns(v, k, k + 1, c, -s);

            let (c2, s2) = givens(diag[k], bulge);
            diag[k] = c2 * diag[k] + s2 * bulge;
            let ek2 = off[k];
            let dk2 = diag[k + 1];
            off[k] = c2 * ek2 + s2 * dk2;
            diag[k + 1] = c2 * dk2 - s2 * ek2;
            if k + 1 < hi {
                let ek1 = off[k + 1];
                x = off[k];
                z = s2 * ek1;
                off[k + 1] = c2 * ek1;
            }
            rotate_columns(u, k, k + 1, c2, -s2);
        }
    }
    Ok(())
}

/// Replace columns (p, q) of `m` by (c·p − s·q, s·p + c·q).
#[inline]
fn rotate_columns(m: &mut RealMatrix, p: usize, q: usize, c: f64, s: f64) {
    for row in 0..m.rows() {
        let a = m.get(row, p);
        let b = m.get(row, q);
        m.set(row, p, c * a - s * b);
        m.set(row, q, s * a + c * b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{tag, Stream};

    fn check_factors(m: &RealMatrix, tol: f64) {
        let f = svd(m).unwrap();
        assert_eq!(f.len(), m.rows().min(m.cols()));
        // Nonincreasing, nonnegative.
        for w in f.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "not sorted: {:?}", f.singular_values);
        }
        for s in &f.singular_values {
            assert!(*s >= 0.0);
        }
        // Orthonormal columns.
        let utu = f.left.transpose().matmul(&f.left).unwrap();
        let vtv = f.right.transpose().matmul(&f.right).unwrap();
        let id = RealMatrix::identity(f.len());
        assert!(utu.max_abs_diff(&id).unwrap() < 1e-10, "UᵀU off");
        assert!(vtv.max_abs_diff(&id).unwrap() < 1e-10, "VᵀV off");
        // Reconstruction.
        let err = f.reconstruct().max_abs_diff(m).unwrap();
        assert!(err < tol, "reconstruction error {err}");
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let s = Stream::new(seed, tag::TEST);
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            data.push(s.with(i as u64).uniform_in(-1.0, 1.0));
        }
        RealMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_singular_values() {
        let f = svd(&RealMatrix::identity(3)).unwrap();
        for s in &f.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_known_values() {
        // uvᵀ with u = [1, 2], v = [1, 1]: single singular value ‖u‖‖v‖ = √10.
        let m = RealMatrix::from_vec(2, 2, vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let f = svd(&m).unwrap();
        assert!((f.singular_values[0] - 10.0f64.sqrt()).abs() < 1e-10);
        assert!(f.singular_values[1].abs() < 1e-10);
    }

    #[test]
    fn diagonal_with_negative_entry() {
        let m = RealMatrix::from_vec(2, 2, vec![-3.0, 0.0, 0.0, 2.0]).unwrap();
        let f = svd(&m).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((f.singular_values[1] - 2.0).abs() < 1e-12);
        check_factors(&m, 1e-10);
    }

    #[test]
    fn known_2x2() {
        // AᵀA = [[13, 12], [12, 13]] has eigenvalues 25 and 1.
        let m = RealMatrix::from_vec(2, 2, vec![3.0, 2.0, 2.0, 3.0]).unwrap();
        let f = svd(&m).unwrap();
        assert!((f.singular_values[0] - 5.0).abs() < 1e-10);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn factors_on_random_shapes() {
        for (rows, cols, seed) in [
            (1, 1, 1u64),
            (1, 5, 2),
            (5, 1, 3),
            (4, 4, 4),
            (8, 3, 5),
            (3, 8, 6),
            (12, 12, 7),
            (20, 7, 8),
            (7, 20, 9),
        ] {
            let m = random_matrix(rows, cols, seed);
            check_factors(&m, 1e-8 * (1.0 + m.max_abs()));
        }
    }

    #[test]
    fn rank_deficient() {
        // Rows proportional to [1, 2, 3]: rank 1.
        let m =
            RealMatrix::from_vec(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0]).unwrap();
        let f = svd(&m).unwrap();
        assert!(f.singular_values[0] > 1.0);
        assert!(f.singular_values[1].abs() < 1e-9);
        assert!(f.singular_values[2].abs() < 1e-9);
        check_factors(&m, 1e-9);
    }

    #[test]
    fn zero_matrix() {
        let m = RealMatrix::zeros(3, 2);
        let f = svd(&m).unwrap();
        assert_eq!(f.singular_values, vec![0.0, 0.0]);
        check_factors(&m, 1e-15);
    }

    #[test]
    fn empty_matrix_errors() {
        assert!(matches!(
            svd(&RealMatrix::zeros(0, 3)),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn deterministic_factors_across_calls() {
        let m = random_matrix(9, 6, 42);
        let f1 = svd(&m).unwrap();
        let f2 = svd(&m).unwrap();
        assert_eq!(f1.singular_values, f2.singular_values);
        assert_eq!(f1.left, f2.left);
        assert_eq!(f1.right, f2.right);
    }

    #[test]
    fn big_scale_invariance() {
        let m = random_matrix(6, 4, 13).scale(1e8);
        check_factors(&m, 1e-8 * m.max_abs());
    }
}
