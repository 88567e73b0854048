//! Principal component regression: hard-rank truncation of the donor
//! outcome matrix followed by minimum-norm OLS, plus rank-selection
//! strategies for when the true rank is unknown.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{default_zero_tol, svd, truncated_pinv, RealMatrix};
use crate::panel::RegressionInputs;

/// How to pick the PCR truncation rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum RankStrategy {
    /// Use `k` verbatim (the consistency theory assumes the rank is known).
    Fixed { k: usize },
    /// Smallest `k` whose singular values capture `fraction` of the total
    /// squared spectral mass.
    EnergyThreshold { fraction: f64 },
    /// Keep singular values above `multiplier × median(s)`.
    HardThreshold { multiplier: f64 },
}

impl RankStrategy {
    pub fn energy(fraction: f64) -> Self {
        RankStrategy::EnergyThreshold { fraction }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RankStrategy::Fixed { k } => {
                if k == 0 {
                    return Err(Error::InvalidParameter("fixed rank must be >= 1".into()));
                }
            }
            RankStrategy::EnergyThreshold { fraction } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::InvalidParameter(
                        "energy fraction must lie in (0, 1]".into(),
                    ));
                }
            }
            RankStrategy::HardThreshold { multiplier } => {
                if !(multiplier > 0.0 && multiplier.is_finite()) {
                    return Err(Error::InvalidParameter("multiplier must be > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Estimated imputation weights for one arm, aligned with the donor set
/// ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub rank_used: usize,
    pub donor_units: Vec<usize>,
}

impl WeightVector {
    /// All-zero weights over a donor set (used when there is nothing to
    /// impute for an arm).
    pub fn zeros(donor_units: Vec<usize>) -> Self {
        WeightVector {
            values: vec![0.0; donor_units.len()],
            rank_used: 0,
            donor_units,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        crate::math::l1_norm(&self.values)
    }

    pub fn l2_norm(&self) -> f64 {
        crate::math::l2_norm(&self.values)
    }
}

/// Choose a truncation rank for `z` under the given strategy.
pub fn select_rank(z: &RealMatrix, strategy: RankStrategy) -> Result<usize> {
    strategy.validate()?;
    if z.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let max_rank = z.rows().min(z.cols());
    match strategy {
        RankStrategy::Fixed { k } => {
            if k > max_rank {
                return Err(Error::RankOutOfRange {
                    requested: k,
                    max: max_rank,
                });
            }
            Ok(k)
        }
        RankStrategy::EnergyThreshold { fraction } => {
            let f = svd(z)?;
            let total: f64 = f.singular_values.iter().map(|s| s * s).sum();
            if total == 0.0 {
                return Ok(1);
            }
            let mut acc = 0.0;
            for (i, s) in f.singular_values.iter().enumerate() {
                acc += s * s;
                if acc >= fraction * total {
                    return Ok(i + 1);
                }
            }
            Ok(max_rank)
        }
        RankStrategy::HardThreshold { multiplier } => {
            let f = svd(z)?;
            let s = &f.singular_values;
            let median = if s.len() % 2 == 1 {
                s[s.len() / 2]
            } else {
                0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
            };
            let cutoff = multiplier * median;
            let count = s.iter().filter(|x| **x > cutoff).count();
            Ok(count.max(1))
        }
    }
}

/// Fit PCR weights: `β̂ = (rank-k truncation of Z)⁺ · response`.
///
/// With `k` at full rank and no singular value below the zero cutoff this
/// coincides with plain minimum-norm least squares.
pub fn pcr_fit(inputs: &RegressionInputs, strategy: RankStrategy) -> Result<WeightVector> {
    if inputs.response.is_empty() || inputs.covariates.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if inputs.response.len() != inputs.covariates.rows() {
        return Err(Error::DimensionMismatch {
            expected: inputs.covariates.rows(),
            actual: inputs.response.len(),
        });
    }
    let k = select_rank(&inputs.covariates, strategy)?;
    let f = svd(&inputs.covariates)?;
    let pinv = truncated_pinv(&f, k, default_zero_tol(&f))?;
    let values = pinv.matvec(&inputs.response)?;
    Ok(WeightVector {
        values,
        rank_used: k,
        donor_units: inputs.donor_units.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_norm_least_squares;
    use crate::math;
    use crate::rng::{tag, Stream};

    fn inputs(covariates: RealMatrix, response: Vec<f64>) -> RegressionInputs {
        let donor_units = (0..covariates.cols()).collect();
        RegressionInputs {
            response,
            covariates,
            donor_units,
            arm: 0,
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let s = Stream::new(seed, tag::TEST);
        let mut m = RealMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, s.with(i as u64).with(j as u64).uniform_in(-1.0, 1.0));
            }
        }
        m
    }

    #[test]
    fn identity_covariates_recover_response() {
        let w = pcr_fit(
            &inputs(RealMatrix::identity(2), vec![3.0, 1.0]),
            RankStrategy::Fixed { k: 2 },
        )
        .unwrap();
        assert!((w.values[0] - 3.0).abs() < 1e-12);
        assert!((w.values[1] - 1.0).abs() < 1e-12);
        assert_eq!(w.rank_used, 2);
    }

    #[test]
    fn zero_response_gives_zero_weights() {
        let z = random_matrix(6, 4, 3);
        for k in 1..=4 {
            let w = pcr_fit(&inputs(z.clone(), vec![0.0; 6]), RankStrategy::Fixed { k }).unwrap();
            assert!(w.values.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn noiseless_low_rank_fit_is_exact_and_min_norm() {
        // Rank-3 covariates with a response in their column span; fitting at
        // k = 4 (one above the true rank) still reproduces the response and
        // returns the minimum-norm solution.
        let left = random_matrix(12, 3, 5);
        let right = random_matrix(3, 8, 6);
        let z = left.matmul(&right).unwrap();
        let s = Stream::new(7, tag::TEST);
        let beta0: Vec<f64> = (0..8).map(|i| s.with(i).uniform_in(-1.0, 1.0)).collect();
        let y = z.matvec(&beta0).unwrap();

        let w = pcr_fit(&inputs(z.clone(), y.clone()), RankStrategy::Fixed { k: 4 }).unwrap();
        let fit = z.matvec(&w.values).unwrap();
        let resid: Vec<f64> = fit.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(math::l2_norm(&resid) <= 1e-8);

        let mn = min_norm_least_squares(&z, &y).unwrap();
        let diff: Vec<f64> = w.values.iter().zip(&mn).map(|(a, b)| a - b).collect();
        assert!(math::l2_norm(&diff) <= 1e-8);
        assert!(math::l2_norm(&w.values) <= math::l2_norm(&mn) + 1e-8);
    }

    #[test]
    fn full_rank_equals_min_norm_least_squares() {
        let z = random_matrix(9, 5, 11);
        let y: Vec<f64> = (0..9)
            .map(|i| Stream::new(12, tag::TEST).with(i).uniform_in(-1.0, 1.0))
            .collect();
        let w = pcr_fit(&inputs(z.clone(), y.clone()), RankStrategy::Fixed { k: 5 }).unwrap();
        let mn = min_norm_least_squares(&z, &y).unwrap();
        for (a, b) in w.values.iter().zip(&mn) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn scale_equivariance() {
        let z = random_matrix(7, 4, 21);
        let y: Vec<f64> = (0..7)
            .map(|i| Stream::new(22, tag::TEST).with(i).uniform_in(-1.0, 1.0))
            .collect();
        let base = pcr_fit(&inputs(z.clone(), y.clone()), RankStrategy::Fixed { k: 3 }).unwrap();
        for c in [-2.0, 0.5, 10.0] {
            let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
            let w = pcr_fit(&inputs(z.clone(), scaled), RankStrategy::Fixed { k: 3 }).unwrap();
            for (a, b) in w.values.iter().zip(&base.values) {
                let expect = c * b;
                let tol = 1e-10 * expect.abs().max(1.0);
                assert!((a - expect).abs() < tol, "{a} vs {expect}");
            }
        }
    }

    #[test]
    fn permutation_covariance() {
        let z = random_matrix(6, 4, 31);
        let y: Vec<f64> = (0..6)
            .map(|i| Stream::new(32, tag::TEST).with(i).uniform_in(-1.0, 1.0))
            .collect();
        let base = pcr_fit(&inputs(z.clone(), y.clone()), RankStrategy::Fixed { k: 4 }).unwrap();

        // Swap columns 1 and 3.
        let perm = [0usize, 3, 2, 1];
        let mut zp = RealMatrix::zeros(6, 4);
        for i in 0..6 {
            for (jp, &j) in perm.iter().enumerate() {
                zp.set(i, jp, z.get(i, j));
            }
        }
        let permuted = pcr_fit(&inputs(zp, y), RankStrategy::Fixed { k: 4 }).unwrap();
        for (jp, &j) in perm.iter().enumerate() {
            assert!((permuted.values[jp] - base.values[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn select_rank_strategies() {
        // Exactly rank-3 matrix: tiny energy threshold already needs 3.
        let left = random_matrix(10, 3, 41);
        let right = random_matrix(3, 7, 42);
        let z = left.matmul(&right).unwrap();
        assert_eq!(select_rank(&z, RankStrategy::energy(0.999)).unwrap(), 3);

        // Identity: equal singular values, half the energy needs half of them.
        let id = RealMatrix::identity(4);
        assert_eq!(select_rank(&id, RankStrategy::energy(0.5)).unwrap(), 2);

        let any = random_matrix(10, 10, 43);
        assert_eq!(select_rank(&any, RankStrategy::Fixed { k: 5 }).unwrap(), 5);
        assert!(select_rank(&any, RankStrategy::Fixed { k: 11 }).is_err());
        assert!(select_rank(&any, RankStrategy::Fixed { k: 0 }).is_err());
        assert!(select_rank(&any, RankStrategy::energy(0.0)).is_err());

        // Hard threshold: rank-3 plus small noise keeps the 3 leading values.
        let noise = random_matrix(10, 7, 44).scale(1e-6);
        let noisy = z.sub(&noise.scale(-1.0)).unwrap();
        assert_eq!(
            select_rank(&noisy, RankStrategy::HardThreshold { multiplier: 2.0 }).unwrap(),
            3
        );
    }

    #[test]
    fn requested_rank_above_t_bar_fails() {
        // With fewer common measurements than the requested rank the fit
        // must fail loudly instead of silently clamping.
        let z = random_matrix(3, 8, 51);
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            pcr_fit(&inputs(z, y), RankStrategy::Fixed { k: 4 }),
            Err(Error::RankOutOfRange {
                requested: 4,
                max: 3
            })
        ));
    }
}
