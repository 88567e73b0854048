//! The synthetic treatment-effect estimator: observed target-set sums plus
//! weighted donor imputation at `t*`, the identification-bound arithmetic,
//! and the exact bias/variance decomposition of the realized error.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dgp::LatentTruth;
use crate::diagnostics::oracle_beta;
use crate::error::{Error, Result};
use crate::panel::{build_regression, design, ObservedDesign, PanelData};
use crate::pcr::{pcr_fit, RankStrategy, WeightVector};

/// Causal target: which unit set the effect is averaged over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// Units treated at `t*`.
    Att,
    /// Units untreated at `t*`.
    Atu,
    /// All units.
    Ate,
    Custom(Vec<usize>),
}

/// Estimation output with design diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub ate_hat: f64,
    pub target: TargetSpec,
    pub t_star: usize,
    pub n0: usize,
    pub n1: usize,
    pub m_count: usize,
    pub m0_count: usize,
    pub m1_count: usize,
    pub t_bar_len: usize,
    /// `t*` had a constant treatment column and was dropped from the
    /// regression measurements.
    pub t_star_excluded: bool,
    /// Arms whose imputation term was skipped because `M^(1-a)` is empty.
    pub empty_imputation: [bool; 2],
    pub beta0: WeightVector,
    pub beta1: WeightVector,
}

fn check_alignment(design: &ObservedDesign, beta: &WeightVector, arm: u8) -> Result<()> {
    let donors = design.donor_units(arm);
    if beta.values.len() != donors.len() || beta.donor_units != donors {
        return Err(Error::MisalignedWeights {
            expected: donors.len(),
            actual: beta.values.len(),
        });
    }
    Ok(())
}

/// The estimator:
/// `(1/M) [Σ_{M¹} Y + Σ_{I¹} β¹ Y] − (1/M) [Σ_{M⁰} Y + Σ_{I⁰} β⁰ Y]`,
/// all outcomes taken at `t*`.
pub fn ate_hat(
    panel: &PanelData,
    design: &ObservedDesign,
    beta0: &WeightVector,
    beta1: &WeightVector,
) -> Result<f64> {
    check_alignment(design, beta0, 0)?;
    check_alignment(design, beta1, 1)?;
    let t = design.t_star;
    let m = design.m_count() as f64;

    let mut arm_sums = [0.0f64; 2];
    for arm in 0..2u8 {
        let beta = if arm == 0 { beta0 } else { beta1 };
        let mut acc = 0.0;
        for &n in design.target_units(arm) {
            acc += panel.outcomes.get(n, t);
        }
        for (i, &n) in design.donor_units(arm).iter().enumerate() {
            acc += beta.values[i] * panel.outcomes.get(n, t);
        }
        arm_sums[arm as usize] = acc;
    }
    Ok((arm_sums[1] - arm_sums[0]) / m)
}

/// Resolve the target spec into a concrete unit set.
pub fn resolve_target_units(
    panel: &PanelData,
    t_star: usize,
    target: &TargetSpec,
) -> Result<Vec<usize>> {
    let n = panel.n_units();
    let treated: Vec<usize> = (0..n)
        .filter(|&u| panel.treatments.get(u, t_star) == 1)
        .collect();
    let set = match target {
        TargetSpec::Att => treated,
        TargetSpec::Atu => (0..n)
            .filter(|&u| panel.treatments.get(u, t_star) == 0)
            .collect(),
        TargetSpec::Ate => (0..n).collect(),
        TargetSpec::Custom(units) => units.clone(),
    };
    if set.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    Ok(set)
}

/// Run the full pipeline: design, per-arm regression, PCR fit, estimate.
///
/// Arms with nothing to impute (`M^(1-a)` empty) get zero weights; arms
/// that need imputation but have no donors are an error.
pub fn estimate(
    panel: &PanelData,
    t_star: usize,
    target: TargetSpec,
    strategy: RankStrategy,
) -> Result<EstimateResult> {
    if t_star >= panel.n_measurements() {
        return Err(Error::RankOutOfRange {
            requested: t_star,
            max: panel.n_measurements() - 1,
        });
    }
    let target_set = resolve_target_units(panel, t_star, &target)?;
    let d = design(panel, t_star, &target_set)?;

    let mut empty_imputation = [false; 2];
    let mut betas: [Option<WeightVector>; 2] = [None, None];
    for arm in 0..2u8 {
        let donors = d.donor_units(arm).to_vec();
        if d.target_units(1 - arm).is_empty() {
            empty_imputation[arm as usize] = true;
            betas[arm as usize] = Some(WeightVector::zeros(donors));
            continue;
        }
        if donors.is_empty() {
            return Err(Error::DegenerateDesign { arm });
        }
        let inputs = build_regression(panel, &d, arm)?;
        betas[arm as usize] = Some(pcr_fit(&inputs, strategy)?);
    }
    let [beta0, beta1] = betas;
    let beta0 = beta0.unwrap();
    let beta1 = beta1.unwrap();
    let value = ate_hat(panel, &d, &beta0, &beta1)?;

    Ok(EstimateResult {
        ate_hat: value,
        target,
        t_star,
        n0: d.i0.len(),
        n1: d.i1.len(),
        m_count: d.m_count(),
        m0_count: d.m0.len(),
        m1_count: d.m1.len(),
        t_bar_len: d.common_meas.len(),
        t_star_excluded: d.t_star_excluded,
        empty_imputation,
        beta0,
        beta1,
    })
}

/// The worst-case identification bound
/// `Δ_E (1 + (‖β⁰‖₁ + ‖β¹‖₁) / M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationBound {
    pub delta_e: f64,
    pub l1_beta0: f64,
    pub l1_beta1: f64,
    pub m_count: usize,
    pub bound: f64,
}

pub fn identification_bound(
    delta_e: f64,
    beta0: &WeightVector,
    beta1: &WeightVector,
    m_count: usize,
) -> Result<IdentificationBound> {
    if !delta_e.is_finite() || delta_e < 0.0 {
        return Err(Error::InvalidParameter(
            "delta_e must be finite and >= 0".into(),
        ));
    }
    if m_count == 0 {
        return Err(Error::EmptyTargetSet);
    }
    let l1_beta0 = beta0.l1_norm();
    let l1_beta1 = beta1.l1_norm();
    let bound = delta_e * (1.0 + (l1_beta0 + l1_beta1) / m_count as f64);
    Ok(IdentificationBound {
        delta_e,
        l1_beta0,
        l1_beta1,
        m_count,
        bound,
    })
}

/// Error components for one arm, each already scaled by `1/M` and entering
/// the total with sign `+` for arm 1 and `-` for arm 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmErrorComponents {
    pub arm: u8,
    /// `(1/M) Σ_{M^a} ε`: noise of the directly observed target units.
    pub variance_mean_noise: f64,
    /// `(1/M) <β_oracle, ε_{I^a}>`: noise picked up by the oracle weights.
    pub variance_weighted_noise: f64,
    /// `(1/M) <Δβ, ε_{I^a}>`: weight-estimation error interacting with noise.
    pub bias_delta_beta_noise: f64,
    /// `(1/M) <Δβ, E[Y_{I^a}]>`: weight-estimation error against the means.
    pub bias_delta_beta_mean: f64,
    /// `(1/M) (<β_oracle, E[Y_{I^a}]> − Σ_{M^(1-a)} E[Y^(a)])`: the factor
    /// model approximation (and span) bias; zero for exact linear truth.
    pub bias_factor_approx: f64,
}

impl ArmErrorComponents {
    pub fn sum(&self) -> f64 {
        self.variance_mean_noise
            + self.variance_weighted_noise
            + self.bias_delta_beta_noise
            + self.bias_delta_beta_mean
            + self.bias_factor_approx
    }
}

/// Exact algebraic decomposition of `ÂTE − E[ATE_M | U]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVarianceReport {
    pub arm0: ArmErrorComponents,
    pub arm1: ArmErrorComponents,
    /// `arm1.sum() − arm0.sum()`; equals `ate_hat − oracle_target` up to
    /// floating-point regrouping.
    pub total_error: f64,
    pub ate_hat: f64,
    pub oracle_target: f64,
}

/// Decompose the realized estimator error into bias and variance terms
/// using the simulation truth. Oracle weights are recomputed internally.
pub fn bias_variance_report(
    truth: &LatentTruth,
    design: &ObservedDesign,
    beta0: &WeightVector,
    beta1: &WeightVector,
) -> Result<BiasVarianceReport> {
    check_alignment(design, beta0, 0)?;
    check_alignment(design, beta1, 1)?;
    let t = design.t_star;
    let m = design.m_count() as f64;

    let mut arms = Vec::with_capacity(2);
    let mut ate_terms = [0.0f64; 2];
    for arm in 0..2u8 {
        let beta_hat = if arm == 0 { beta0 } else { beta1 };
        let donors = design.donor_units(arm);
        let oracle = oracle_beta(truth, design, arm)?;

        let mut variance_mean_noise = 0.0;
        for &n in design.target_units(arm) {
            variance_mean_noise += truth.noise_tensor.get(n, t, arm);
        }
        let mut variance_weighted_noise = 0.0;
        let mut bias_delta_beta_noise = 0.0;
        let mut bias_delta_beta_mean = 0.0;
        let mut weighted_mean = 0.0;
        for (i, &n) in donors.iter().enumerate() {
            let eps = truth.noise_tensor.get(n, t, arm);
            let mu = truth.mean_tensor.get(n, t, arm);
            let b_or = oracle.weights.values[i];
            let delta = beta_hat.values[i] - b_or;
            variance_weighted_noise += b_or * eps;
            bias_delta_beta_noise += delta * eps;
            bias_delta_beta_mean += delta * mu;
            weighted_mean += b_or * mu;
        }
        let mut impute_target_mean = 0.0;
        for &n in design.target_units(1 - arm) {
            impute_target_mean += truth.mean_tensor.get(n, t, arm);
        }
        let bias_factor_approx = (weighted_mean - impute_target_mean) / m;

        // Observed arm sum for the estimate recomputation.
        let mut obs = 0.0;
        for &n in design.target_units(arm) {
            obs += truth.potential_outcome(n, t, arm);
        }
        for (i, &n) in donors.iter().enumerate() {
            obs += beta_hat.values[i] * truth.potential_outcome(n, t, arm);
        }
        ate_terms[arm as usize] = obs / m;

        arms.push(ArmErrorComponents {
            arm,
            variance_mean_noise: variance_mean_noise / m,
            variance_weighted_noise: variance_weighted_noise / m,
            bias_delta_beta_noise: bias_delta_beta_noise / m,
            bias_delta_beta_mean: bias_delta_beta_mean / m,
            bias_factor_approx,
        });
    }
    let arm1 = arms.pop().unwrap();
    let arm0 = arms.pop().unwrap();

    let mut oracle_target = 0.0;
    for &n in &design.target_set {
        oracle_target += truth.mean_tensor.get(n, t, 1) - truth.mean_tensor.get(n, t, 0);
    }
    oracle_target /= m;

    Ok(BiasVarianceReport {
        total_error: arm1.sum() - arm0.sum(),
        arm0,
        arm1,
        ate_hat: ate_terms[1] - ate_terms[0],
        oracle_target,
    })
}
