//! Shared test oracles, independent of the library's SVD implementation.

#![allow(clippy::needless_range_loop)]

use factorate_core::linalg::RealMatrix;
use factorate_core::rng::{tag, Stream};

/// Singular values by one-sided Jacobi rotations: orthogonalize the columns
/// of `A` pairwise until convergence; the column norms are the singular
/// values. Entirely separate from the Golub-Kahan path under test.
pub fn jacobi_singular_values(m: &RealMatrix) -> Vec<f64> {
    let work = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let rows = work.rows();
    let cols = work.cols();
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| work.column(j)).collect();

    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    app += a[p][i] * a[p][i];
                    aqq += a[q][i] * a[q][i];
                    apq += a[p][i] * a[q][i];
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(1e-300));
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let vp = a[p][i];
                    let vq = a[q][i];
                    a[p][i] = c * vp - s * vq;
                    a[q][i] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-13 {
            break;
        }
    }

    let mut sv: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    let s = Stream::new(seed, tag::TEST);
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        data.push(s.with(i as u64).uniform_in(-1.0, 1.0));
    }
    RealMatrix::from_vec(rows, cols, data).unwrap()
}
