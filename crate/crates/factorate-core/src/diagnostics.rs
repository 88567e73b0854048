//! Truth-side quantities available only in simulation: oracle causal
//! targets, oracle minimum-norm weights, checkers for the identification
//! assumptions, weight-error diagnostics, and the normality standardizer.

use alloc::vec::Vec;

use serde::Serialize;

use crate::dgp::{LatentTruth, Tensor3};
use crate::error::{Error, Result};
use crate::linalg::{min_norm_least_squares, svd, RealMatrix};
use crate::math;
use crate::panel::ObservedDesign;
use crate::pcr::WeightVector;

/// Singular values above `1e-9 × s₁` count toward the detected rank.
const RANK_DETECT_REL_TOL: f64 = 1e-9;

/// Oracle causal targets computed from the mean tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTargets {
    /// Over the treated units at `t*`; `None` when none are treated.
    pub att: Option<f64>,
    /// Over the untreated units at `t*`; `None` when all are treated.
    pub atu: Option<f64>,
    /// Over all units.
    pub ate: f64,
}

/// `E[ATE_M | U]`: mean of treated-minus-control mean outcomes at `t_star`
/// over the target set.
pub fn oracle_ate(truth: &LatentTruth, target_set: &[usize], t_star: usize) -> Result<f64> {
    if target_set.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    if t_star >= truth.n_measurements() {
        return Err(Error::RankOutOfRange {
            requested: t_star,
            max: truth.n_measurements() - 1,
        });
    }
    let mut sum = 0.0;
    for &n in target_set {
        if n >= truth.n_units() {
            return Err(Error::RankOutOfRange {
                requested: n,
                max: truth.n_units() - 1,
            });
        }
        sum += truth.mean_tensor.get(n, t_star, 1) - truth.mean_tensor.get(n, t_star, 0);
    }
    Ok(sum / target_set.len() as f64)
}

/// ATT / ATU / ATE presets for a design.
pub fn oracle_targets(truth: &LatentTruth, design: &ObservedDesign) -> Result<OracleTargets> {
    let all: Vec<usize> = (0..truth.n_units()).collect();
    Ok(OracleTargets {
        att: if design.i1.is_empty() {
            None
        } else {
            Some(oracle_ate(truth, &design.i1, design.t_star)?)
        },
        atu: if design.i0.is_empty() {
            None
        } else {
            Some(oracle_ate(truth, &design.i0, design.t_star)?)
        },
        ate: oracle_ate(truth, &all, design.t_star)?,
    })
}

/// Oracle weights plus the span diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBeta {
    pub weights: WeightVector,
    /// Euclidean distance of `λ_{M^(1-a)}` from the span of the donor
    /// factors; positive when the linear-span assumption is violated.
    pub span_residual: f64,
}

/// Minimum-norm solution of `Λ_{I^(a)}ᵀ β = λ_{M^(1-a)}`.
///
/// Inconsistency is reported via `span_residual`, not an error.
pub fn oracle_beta(truth: &LatentTruth, design: &ObservedDesign, arm: u8) -> Result<OracleBeta> {
    let donors = design.donor_units(arm);
    let impute_for = design.target_units(1 - arm);
    let r = truth.lin_unit_factors.cols();

    let mut lambda_sum = alloc::vec![0.0; r];
    for &n in impute_for {
        for (j, v) in truth.lambda(n).iter().enumerate() {
            lambda_sum[j] += v;
        }
    }

    if donors.is_empty() {
        if impute_for.is_empty() {
            return Ok(OracleBeta {
                weights: WeightVector::zeros(Vec::new()),
                span_residual: 0.0,
            });
        }
        return Err(Error::DegenerateDesign { arm });
    }

    // Λᵀ is r × N_a with columns λ_n.
    let mut lt = RealMatrix::zeros(r, donors.len());
    for (col, &n) in donors.iter().enumerate() {
        for (row, v) in truth.lambda(n).iter().enumerate() {
            lt.set(row, col, *v);
        }
    }
    let values = min_norm_least_squares(&lt, &lambda_sum)?;
    let fit = lt.matvec(&values)?;
    let resid: Vec<f64> = fit.iter().zip(&lambda_sum).map(|(a, b)| a - b).collect();
    let span_residual = math::l2_norm(&resid);

    Ok(OracleBeta {
        weights: WeightVector {
            values,
            rank_used: 0,
            donor_units: donors.to_vec(),
        },
        span_residual,
    })
}

/// Noiseless signal matrix `X^lr = [<λ_n, ρ_{t,a_t}>]` over the common
/// measurements (rows) and the donor units of `arm` (columns).
pub fn x_lr(truth: &LatentTruth, design: &ObservedDesign, arm: u8) -> Result<RealMatrix> {
    if design.common_meas.is_empty() {
        return Err(Error::NoCommonMeasurements);
    }
    let donors = design.donor_units(arm);
    if donors.is_empty() {
        return Err(Error::DegenerateDesign { arm });
    }
    let mut m = RealMatrix::zeros(design.common_meas.len(), donors.len());
    for (row, (t, a_t)) in design.common_meas.iter().enumerate() {
        let rho = truth.rho(*t, *a_t);
        for (col, &n) in donors.iter().enumerate() {
            m.set(row, col, math::dot(truth.lambda(n), rho));
        }
    }
    Ok(m)
}

/// Checker outputs for the estimation assumptions, relative to the stored
/// linearization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub span_residual: f64,
    /// `s_r̄ / sqrt(T̄ N_a / r̄)`: of order one when signal energy spreads
    /// evenly across the factors.
    pub well_balanced_ratio: f64,
    /// Relative distance of the `t*` target vector from the rowspace of
    /// `X^lr`; zero means the generalization condition holds.
    pub subspace_residual: f64,
    pub beta_l1: f64,
    pub beta_l2: f64,
    /// Numerical rank of `X^lr`.
    pub detected_rank: usize,
    /// Fitted dispersion exponent; only available from a size sweep.
    pub disperse_exponent: Option<f64>,
}

pub fn assumption_report(
    truth: &LatentTruth,
    design: &ObservedDesign,
    arm: u8,
) -> Result<AssumptionReport> {
    let x = x_lr(truth, design, arm)?;
    let f = svd(&x)?;
    let s1 = f.singular_values[0];
    let detected_rank = f
        .singular_values
        .iter()
        .filter(|s| **s > RANK_DETECT_REL_TOL * s1)
        .count()
        .max(1);
    let t_bar = x.rows() as f64;
    let n_a = x.cols() as f64;
    let s_r = f.singular_values[detected_rank - 1];
    let well_balanced_ratio = s_r / math::sqrt(t_bar * n_a / detected_rank as f64);

    // Target vector [<λ_n, ρ_{t*, arm}>] over the donors.
    let donors = design.donor_units(arm);
    let rho_star = truth.rho(design.t_star, arm);
    let target: Vec<f64> = donors
        .iter()
        .map(|&n| math::dot(truth.lambda(n), rho_star))
        .collect();
    let subspace_residual = rowspace_residual(&f.right, detected_rank, &target);

    let ob = oracle_beta(truth, design, arm)?;

    Ok(AssumptionReport {
        span_residual: ob.span_residual,
        well_balanced_ratio,
        subspace_residual,
        beta_l1: ob.weights.l1_norm(),
        beta_l2: ob.weights.l2_norm(),
        detected_rank,
        disperse_exponent: None,
    })
}

/// Relative distance of `v` from the span of the first `rank` columns of
/// `basis` (orthonormal columns assumed).
fn rowspace_residual(basis: &RealMatrix, rank: usize, v: &[f64]) -> f64 {
    let norm = math::l2_norm(v);
    if norm == 0.0 {
        return 0.0;
    }
    let mut projected = alloc::vec![0.0; v.len()];
    for l in 0..rank {
        let coef: f64 = (0..v.len()).map(|i| basis.get(i, l) * v[i]).sum();
        for (i, p) in projected.iter_mut().enumerate() {
            *p += coef * basis.get(i, l);
        }
    }
    let resid: Vec<f64> = v.iter().zip(&projected).map(|(a, b)| a - b).collect();
    math::l2_norm(&resid) / norm
}

/// `(‖Δβ‖₂, ‖V_r V_rᵀ Δβ‖₂)` with `V_r` the detected-rank right singular
/// vectors of `x_lr`.
pub fn weight_error(
    beta_hat: &[f64],
    beta_oracle: &[f64],
    x_lr: &RealMatrix,
) -> Result<(f64, f64)> {
    if beta_hat.len() != beta_oracle.len() || beta_hat.len() != x_lr.cols() {
        return Err(Error::MisalignedWeights {
            expected: x_lr.cols(),
            actual: beta_hat.len(),
        });
    }
    let delta: Vec<f64> = beta_hat
        .iter()
        .zip(beta_oracle)
        .map(|(a, b)| a - b)
        .collect();
    let l2 = math::l2_norm(&delta);

    let f = svd(x_lr)?;
    let s1 = f.singular_values[0];
    let rank = f
        .singular_values
        .iter()
        .filter(|s| **s > RANK_DETECT_REL_TOL * s1)
        .count()
        .max(1);
    let mut projected = alloc::vec![0.0; delta.len()];
    for l in 0..rank {
        let coef: f64 = (0..delta.len()).map(|i| f.right.get(i, l) * delta[i]).sum();
        for (i, p) in projected.iter_mut().enumerate() {
            *p += coef * f.right.get(i, l);
        }
    }
    Ok((l2, math::l2_norm(&projected)))
}

/// Noise standardizer for the asymptotic-normality study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityStandardizer {
    pub sigma_bar_0: f64,
    pub sigma_bar_1: f64,
    pub sigma_bar: f64,
}

/// Per-arm standardizer:
/// `σ̄⁽ᵃ⁾ = sqrt([Σ_{M^a} ((1+β_n)σ_n)² + Σ_{I^a∖M^a} (β_n σ_n)²] / M)`
/// with σ taken at `t_star`; `σ̄ = sqrt(σ̄⁽⁰⁾² + σ̄⁽¹⁾²)`.
pub fn sigma_bar(
    design: &ObservedDesign,
    beta0: &WeightVector,
    beta1: &WeightVector,
    sigma: &Tensor3,
) -> Result<NormalityStandardizer> {
    let m = design.m_count() as f64;
    let mut arm_values = [0.0f64; 2];
    for arm in 0..2u8 {
        let beta = if arm == 0 { beta0 } else { beta1 };
        let donors = design.donor_units(arm);
        if beta.values.len() != donors.len() {
            return Err(Error::MisalignedWeights {
                expected: donors.len(),
                actual: beta.values.len(),
            });
        }
        let in_target = design.target_units(arm);
        let mut acc = 0.0;
        for (i, &n) in donors.iter().enumerate() {
            let s = sigma.get(n, design.t_star, arm);
            let coef = if in_target.binary_search(&n).is_ok() {
                1.0 + beta.values[i]
            } else {
                beta.values[i]
            };
            acc += (coef * s) * (coef * s);
        }
        arm_values[arm as usize] = math::sqrt(acc / m);
    }
    Ok(NormalityStandardizer {
        sigma_bar_0: arm_values[0],
        sigma_bar_1: arm_values[1],
        sigma_bar: math::sqrt(arm_values[0] * arm_values[0] + arm_values[1] * arm_values[1]),
    })
}

/// Fitted exponent `w` from `‖β‖₂ / M_{1-a} ≈ C · N_a^{-w}`: the negated
/// least-squares slope of `log(norm)` against `log(N_a)`.
pub fn disperse_exponent(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            actual: samples.len(),
        });
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidParameter(
                "sample sizes must be strictly increasing".into(),
            ));
        }
    }
    if samples.iter().any(|(n, v)| *n <= 0.0 || *v <= 0.0) {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = samples
        .iter()
        .map(|(n, v)| (math::ln(*n), math::ln(*v)))
        .collect();
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / logs.len() as f64;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / logs.len() as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in &logs {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    Ok(-(sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::TreatmentMatrix;
    use crate::dgp::{build_truth, CoefLaw, DgpConfig, NoiseSpec, OutcomeFamily};
    use crate::panel::{design, observe};
    use crate::rng::{tag, Stream};
    use alloc::vec;

    fn truth_with(seed: u64, n: usize, t: usize, k: usize) -> LatentTruth {
        build_truth(&DgpConfig {
            n_units: n,
            n_measurements: t,
            latent_dim: k,
            outcome_family: OutcomeFamily::InteractiveFe {
                factor_dim: k,
                treatment_coef: 1.0,
                unit_law: CoefLaw::default_uniform(),
                time_law: CoefLaw::default_uniform(),
            },
            noise: NoiseSpec::gaussian(0.0),
            seed,
            linearization_rank: None,
        })
        .unwrap()
    }

    #[test]
    fn oracle_ate_interactive_fe_is_constant_effect() {
        // The interactive FE family has homogeneous effect = treatment_coef.
        let truth = truth_with(5, 10, 6, 2);
        let all: Vec<usize> = (0..10).collect();
        let v = oracle_ate(&truth, &all, 3).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // Matches a brute-force loop over the mean tensor.
        let mut acc = 0.0;
        for n in 0..10 {
            acc += truth.mean_tensor.get(n, 3, 1) - truth.mean_tensor.get(n, 3, 0);
        }
        assert!((v - acc / 10.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_ate_zero_when_arms_identical() {
        // Tensor-factor family with shared measurement draws differs across
        // arms, so use a two-way FE with zero effect instead.
        let truth = build_truth(&DgpConfig {
            n_units: 8,
            n_measurements: 5,
            latent_dim: 2,
            outcome_family: OutcomeFamily::TwoWayFe {
                treat_dim: 1,
                effect_law: CoefLaw::Constant { value: 0.0 },
                unit_law: CoefLaw::default_uniform(),
                time_law: CoefLaw::default_uniform(),
            },
            noise: NoiseSpec::gaussian(0.0),
            seed: 1,
            linearization_rank: None,
        })
        .unwrap();
        let all: Vec<usize> = (0..8).collect();
        assert!(oracle_ate(&truth, &all, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn oracle_ate_rejects_empty_set() {
        let truth = truth_with(2, 6, 4, 2);
        assert!(matches!(
            oracle_ate(&truth, &[], 1),
            Err(Error::EmptyTargetSet)
        ));
    }

    #[test]
    fn oracle_targets_weighted_combination() {
        let truth = truth_with(19, 12, 6, 2);
        let mut a = TreatmentMatrix::zeros(12, 6);
        for n in [0usize, 2, 5, 7] {
            a.set(n, 5, 1);
        }
        let panel = observe(&truth, &a).unwrap();
        let d = design(&panel, 5, &(0..12).collect::<Vec<_>>()).unwrap();
        let targets = oracle_targets(&truth, &d).unwrap();
        let att = targets.att.unwrap();
        let atu = targets.atu.unwrap();
        let combined = (4.0 * att + 8.0 * atu) / 12.0;
        assert!((targets.ate - combined).abs() < 1e-12);
    }

    fn design_for(truth: &LatentTruth, treated: &[usize], t_star: usize) -> ObservedDesign {
        let mut a = TreatmentMatrix::zeros(truth.n_units(), truth.n_measurements());
        for &n in treated {
            a.set(n, t_star, 1);
        }
        let panel = observe(truth, &a).unwrap();
        design(&panel, t_star, &(0..truth.n_units()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn oracle_beta_reproduces_lambda_sum() {
        let truth = truth_with(23, 20, 8, 3);
        let d = design_for(&truth, &[1, 4, 9, 15], 7);
        for arm in 0..2u8 {
            let ob = oracle_beta(&truth, &d, arm).unwrap();
            assert!(ob.span_residual < 1e-8, "arm {arm}: {}", ob.span_residual);
            // Lambda sums reproduced within tolerance.
            let donors = d.donor_units(arm);
            let r = truth.lin_unit_factors.cols();
            let mut fit = vec![0.0; r];
            for (i, &n) in donors.iter().enumerate() {
                for (j, v) in truth.lambda(n).iter().enumerate() {
                    fit[j] += ob.weights.values[i] * v;
                }
            }
            let mut target = vec![0.0; r];
            for &n in d.target_units(1 - arm) {
                for (j, v) in truth.lambda(n).iter().enumerate() {
                    target[j] += v;
                }
            }
            for j in 0..r {
                assert!((fit[j] - target[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn oracle_beta_min_norm_among_exact_solutions() {
        let truth = truth_with(29, 16, 8, 2);
        let d = design_for(&truth, &[0, 3], 7);
        let ob = oracle_beta(&truth, &d, 0).unwrap();
        assert!(ob.span_residual < 1e-8);
        let donors = d.donor_units(0);
        let r = truth.lin_unit_factors.cols();
        // Λᵀ as a matrix to find nullspace perturbations.
        let mut lt = RealMatrix::zeros(r, donors.len());
        for (col, &n) in donors.iter().enumerate() {
            for (row, v) in truth.lambda(n).iter().enumerate() {
                lt.set(row, col, *v);
            }
        }
        let f = svd(&lt).unwrap();
        let base_norm = ob.weights.l2_norm();
        // Perturb by random combinations projected onto the nullspace.
        let s = Stream::new(41, tag::TEST);
        for trial in 0..100u64 {
            let raw: Vec<f64> = (0..donors.len())
                .map(|i| s.with(trial).with(i as u64).uniform_in(-1.0, 1.0))
                .collect();
            // Remove rowspace part: raw - V V^T raw over detected rank.
            let s1 = f.singular_values[0];
            let rank = f.singular_values.iter().filter(|x| **x > 1e-9 * s1).count();
            let mut null_part = raw.clone();
            for l in 0..rank {
                let coef: f64 = (0..raw.len()).map(|i| f.right.get(i, l) * raw[i]).sum();
                for (i, val) in null_part.iter_mut().enumerate() {
                    *val -= coef * f.right.get(i, l);
                }
            }
            let alt: Vec<f64> = ob
                .weights
                .values
                .iter()
                .zip(&null_part)
                .map(|(a, b)| a + b)
                .collect();
            // Still an exact solution, but never shorter than the min-norm one.
            assert!(base_norm <= math::l2_norm(&alt) + 1e-8);
        }
    }

    #[test]
    fn oracle_beta_two_identical_factors() {
        // Two donors with identical factors [1, 0] and λ_sum = [2, 0]:
        // the minimum-norm split is (1, 1).
        let mut truth = truth_with(31, 4, 5, 2);
        let mut lam = RealMatrix::zeros(4, 2);
        lam.set(0, 0, 1.0);
        lam.set(1, 0, 1.0);
        lam.set(2, 0, 1.0);
        lam.set(3, 0, 1.0);
        truth.lin_unit_factors = lam;
        let d = design_for(&truth, &[2, 3], 4);
        // Arm 0 donors {0, 1} impute for M^(1) = {2, 3}, λ_sum = [2, 0].
        let ob = oracle_beta(&truth, &d, 0).unwrap();
        assert!((ob.weights.values[0] - 1.0).abs() < 1e-10);
        assert!((ob.weights.values[1] - 1.0).abs() < 1e-10);
        assert!(ob.span_residual < 1e-10);
    }

    #[test]
    fn oracle_beta_orthogonal_violation() {
        // Donor factors span only e1 while λ_sum = [0, 1]: residual is 1.
        let mut truth = truth_with(37, 3, 5, 2);
        let mut lam = RealMatrix::zeros(3, 2);
        lam.set(0, 0, 1.0); // donor
        lam.set(1, 0, 2.0); // donor
        lam.set(2, 1, 1.0); // target unit
        truth.lin_unit_factors = lam;
        let d = design_for(&truth, &[2], 4);
        let ob = oracle_beta(&truth, &d, 0).unwrap();
        assert!((ob.span_residual - 1.0).abs() < 1e-10);
    }

    #[test]
    fn assumption_report_subspace_holds_by_construction() {
        let truth = truth_with(43, 24, 10, 3);
        let d = design_for(&truth, &[2, 8, 11], 9);
        let rep = assumption_report(&truth, &d, 0).unwrap();
        assert!(rep.subspace_residual < 1e-8, "{}", rep.subspace_residual);
        assert!(rep.span_residual < 1e-8);
        assert!(rep.well_balanced_ratio > 0.0);
        // Control-arm signal drops the treatment row: rank k, not k + 1.
        assert_eq!(rep.detected_rank, 3);
        assert!(rep.disperse_exponent.is_none());
    }

    #[test]
    fn assumption_report_detects_duplicated_factors() {
        // Collapse all measurement factors to one vector: X^lr has rank 1.
        let mut truth = truth_with(47, 12, 6, 3);
        let row0: Vec<f64> = truth.lin_meas_factors.row(0).to_vec();
        let mut collapsed = RealMatrix::zeros(12, 4);
        for i in 0..12 {
            for (j, v) in row0.iter().enumerate() {
                collapsed.set(i, j, *v);
            }
        }
        truth.lin_meas_factors = collapsed;
        let d = design_for(&truth, &[1, 2], 5);
        let rep = assumption_report(&truth, &d, 0).unwrap();
        assert_eq!(rep.detected_rank, 1);
    }

    #[test]
    fn weight_error_basics() {
        let truth = truth_with(53, 14, 8, 2);
        let d = design_for(&truth, &[3, 6], 7);
        let x = x_lr(&truth, &d, 0).unwrap();
        let ob = oracle_beta(&truth, &d, 0).unwrap();
        let (l2, proj) = weight_error(&ob.weights.values, &ob.weights.values, &x).unwrap();
        assert_eq!(l2, 0.0);
        assert_eq!(proj, 0.0);

        // A nullspace perturbation has zero projected error but positive l2.
        let f = svd(&x).unwrap();
        let s1 = f.singular_values[0];
        let rank = f.singular_values.iter().filter(|s| **s > 1e-9 * s1).count();
        let n_d = x.cols();
        let s = Stream::new(3, tag::TEST);
        let raw: Vec<f64> = (0..n_d)
            .map(|i| s.with(i as u64).uniform_in(-1.0, 1.0))
            .collect();
        let mut null_part = raw.clone();
        for l in 0..rank {
            let coef: f64 = (0..n_d).map(|i| f.right.get(i, l) * raw[i]).sum();
            for (i, val) in null_part.iter_mut().enumerate() {
                *val -= coef * f.right.get(i, l);
            }
        }
        let perturbed: Vec<f64> = ob
            .weights
            .values
            .iter()
            .zip(&null_part)
            .map(|(a, b)| a + b)
            .collect();
        let (l2, proj) = weight_error(&perturbed, &ob.weights.values, &x).unwrap();
        assert!(l2 > 1e-6);
        assert!(proj < 1e-8, "projected {proj}");
    }

    #[test]
    fn sigma_bar_formula_cases() {
        let truth = truth_with(59, 6, 4, 2);
        // Units 0..2 treated at t* = 3; target is everyone, so M^(a) = I^(a).
        let d = design_for(&truth, &[0, 1, 2], 3);
        let sigma = crate::dgp::sigma_tensor(&NoiseSpec::gaussian(1.0), 6, 4).unwrap();
        let beta0 = WeightVector::zeros(d.i0.clone());
        let beta1 = WeightVector::zeros(d.i1.clone());
        // All β = 0 and M^(a) = M ∩ I^(a) covering the arms: each arm
        // contributes sqrt(M_a / M); with σ ≡ 1 and M_a = 3, M = 6.
        let sb = sigma_bar(&d, &beta0, &beta1, &sigma).unwrap();
        let expect_arm = math::sqrt(3.0 / 6.0);
        assert!((sb.sigma_bar_0 - expect_arm).abs() < 1e-12);
        assert!((sb.sigma_bar_1 - expect_arm).abs() < 1e-12);
        assert!((sb.sigma_bar - 1.0).abs() < 1e-12);

        // Zero noise gives a zero standardizer.
        let zero_sigma = crate::dgp::sigma_tensor(&NoiseSpec::gaussian(0.0), 6, 4).unwrap();
        let sb0 = sigma_bar(&d, &beta0, &beta1, &zero_sigma).unwrap();
        assert_eq!(sb0.sigma_bar, 0.0);
    }

    #[test]
    fn sigma_bar_collapses_to_sigma_when_target_covers_arm() {
        // M^(a) = M (single-arm target), β = 0, σ ≡ s: σ̄^(a) = s.
        let truth = truth_with(61, 5, 4, 2);
        let d = design_for(&truth, &[], 3); // nobody treated
                                            // Target = all units = I^(0) = M^(0).
        let sigma = crate::dgp::sigma_tensor(&NoiseSpec::gaussian(2.0), 5, 4).unwrap();
        let beta0 = WeightVector::zeros(d.i0.clone());
        let beta1 = WeightVector::zeros(d.i1.clone());
        let sb = sigma_bar(&d, &beta0, &beta1, &sigma).unwrap();
        assert!((sb.sigma_bar_0 - 2.0).abs() < 1e-12);
        assert_eq!(sb.sigma_bar_1, 0.0);
    }

    #[test]
    fn sigma_bar_hand_computation() {
        // M = {0, 1, 2} with unit 0 treated; donors I^1 = {0}, I^0 = {1, 2, 3}.
        let truth = truth_with(67, 4, 3, 2);
        let mut a = TreatmentMatrix::zeros(4, 3);
        a.set(0, 2, 1);
        let panel = observe(&truth, &a).unwrap();
        let d = design(&panel, 2, &[0, 1, 2]).unwrap();
        let mut sigma = Tensor3::zeros(4, 3);
        for n in 0..4 {
            for t in 0..3 {
                sigma.set(n, t, 0, 0.5);
                sigma.set(n, t, 1, 1.5);
            }
        }
        let beta0 = WeightVector {
            values: vec![0.2, -0.1, 0.4],
            rank_used: 1,
            donor_units: d.i0.clone(),
        };
        let beta1 = WeightVector {
            values: vec![0.3],
            rank_used: 1,
            donor_units: d.i1.clone(),
        };
        let sb = sigma_bar(&d, &beta0, &beta1, &sigma).unwrap();
        // Arm 1: unit 0 in M^(1): ((1 + 0.3) * 1.5)^2 / 3.
        let expect1 = math::sqrt((1.3f64 * 1.5).powi(2) / 3.0);
        // Arm 0: units 1, 2 in M^(0) with weights 0.2, -0.1; unit 3 outside.
        let expect0 = math::sqrt(
            ((1.2f64 * 0.5).powi(2) + (0.9f64 * 0.5).powi(2) + (0.4f64 * 0.5).powi(2)) / 3.0,
        );
        assert!((sb.sigma_bar_1 - expect1).abs() < 1e-12);
        assert!((sb.sigma_bar_0 - expect0).abs() < 1e-12);

        // Scaling all σ by c scales σ̄ by exactly c.
        let mut sigma2 = Tensor3::zeros(4, 3);
        for n in 0..4 {
            for t in 0..3 {
                sigma2.set(n, t, 0, 0.5 * 3.0);
                sigma2.set(n, t, 1, 1.5 * 3.0);
            }
        }
        let sb2 = sigma_bar(&d, &beta0, &beta1, &sigma2).unwrap();
        assert!((sb2.sigma_bar - 3.0 * sb.sigma_bar).abs() < 1e-12);
    }

    #[test]
    fn disperse_exponent_fits() {
        // Exact power law with w = 0.5.
        let samples: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * libm::pow(n, -0.5)))
            .collect();
        let w = disperse_exponent(&samples).unwrap();
        assert!((w - 0.5).abs() < 1e-8);

        // Constant norms give exponent 0.
        let flat: Vec<(f64, f64)> = [100.0, 200.0, 400.0].iter().map(|&n| (n, 2.0)).collect();
        assert!(disperse_exponent(&flat).unwrap().abs() < 1e-12);

        assert!(matches!(
            disperse_exponent(&flat[..2]),
            Err(Error::InsufficientSamples { .. })
        ));
        let unsorted = vec![(200.0, 1.0), (100.0, 2.0), (400.0, 0.5)];
        assert!(disperse_exponent(&unsorted).is_err());
    }
}
