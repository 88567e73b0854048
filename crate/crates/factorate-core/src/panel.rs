//! Observed panel assembly and the index machinery the estimator needs:
//! donor sets `I^(a)`, target subsets `M^(a)`, the common-treatment
//! measurement set, and the PCR regression inputs.

use alloc::vec::Vec;

use serde::Serialize;

use crate::assignment::TreatmentMatrix;
use crate::dgp::LatentTruth;
use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

/// Observed outcomes and treatments over `N` units × `T` measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub outcomes: RealMatrix,
    pub treatments: TreatmentMatrix,
}

impl PanelData {
    pub fn new(outcomes: RealMatrix, treatments: TreatmentMatrix) -> Result<Self> {
        if outcomes.rows() != treatments.n_units() || outcomes.cols() != treatments.n_measurements()
        {
            return Err(Error::DimensionMismatch {
                expected: outcomes.rows() * outcomes.cols(),
                actual: treatments.n_units() * treatments.n_measurements(),
            });
        }
        Ok(PanelData {
            outcomes,
            treatments,
        })
    }

    pub fn n_units(&self) -> usize {
        self.outcomes.rows()
    }

    pub fn n_measurements(&self) -> usize {
        self.outcomes.cols()
    }
}

/// Index sets for one estimation target at measurement `t_star`.
///
/// `i0`/`i1` partition the units by their treatment at `t_star`; `m0`/`m1`
/// split the target set the same way. `common_meas` lists the measurements
/// where every unit shares one treatment, excluding `t_star` itself when its
/// column happens to be constant (flagged by `t_star_excluded`) so the
/// regression never trains on the prediction target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedDesign {
    pub t_star: usize,
    pub target_set: Vec<usize>,
    pub i0: Vec<usize>,
    pub i1: Vec<usize>,
    pub m0: Vec<usize>,
    pub m1: Vec<usize>,
    pub common_meas: Vec<(usize, u8)>,
    pub t_star_excluded: bool,
}

impl ObservedDesign {
    pub fn m_count(&self) -> usize {
        self.target_set.len()
    }

    /// Donor set `I^(a)`.
    pub fn donor_units(&self, arm: u8) -> &[usize] {
        if arm == 0 {
            &self.i0
        } else {
            &self.i1
        }
    }

    /// Target subset `M^(a) = M ∩ I^(a)`.
    pub fn target_units(&self, arm: u8) -> &[usize] {
        if arm == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }
}

/// Inputs to the PCR regression for one arm: the response is the per-
/// measurement sum of the to-be-imputed units' outcomes, the covariates are
/// the donor units' outcomes over the common measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInputs {
    pub response: Vec<f64>,
    pub covariates: RealMatrix,
    /// Column order of `covariates`: the stored ordering of `I^(a)`.
    pub donor_units: Vec<usize>,
    pub arm: u8,
}

/// Assemble the observed panel: `Y_{n,t} = Y^{(A_{n,t})}_{n,t}`.
pub fn observe(truth: &LatentTruth, a: &TreatmentMatrix) -> Result<PanelData> {
    if truth.n_units() != a.n_units() || truth.n_measurements() != a.n_measurements() {
        return Err(Error::DimensionMismatch {
            expected: truth.n_units() * truth.n_measurements(),
            actual: a.n_units() * a.n_measurements(),
        });
    }
    let mut y = RealMatrix::zeros(truth.n_units(), truth.n_measurements());
    for n in 0..truth.n_units() {
        for t in 0..truth.n_measurements() {
            y.set(n, t, truth.potential_outcome(n, t, a.get(n, t)));
        }
    }
    PanelData::new(y, a.clone())
}

/// Measurements whose treatment column is constant, with that value.
pub fn common_measurements(a: &TreatmentMatrix) -> Vec<(usize, u8)> {
    let mut out = Vec::new();
    for t in 0..a.n_measurements() {
        let first = a.get(0, t);
        if (1..a.n_units()).all(|n| a.get(n, t) == first) {
            out.push((t, first));
        }
    }
    out
}

/// Build the design for a target measurement and unit set.
pub fn design(panel: &PanelData, t_star: usize, target_set: &[usize]) -> Result<ObservedDesign> {
    let n = panel.n_units();
    if t_star >= panel.n_measurements() {
        return Err(Error::RankOutOfRange {
            requested: t_star,
            max: panel.n_measurements() - 1,
        });
    }
    if target_set.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let mut target: Vec<usize> = target_set.to_vec();
    target.sort_unstable();
    target.dedup();
    if let Some(&bad) = target.iter().find(|&&u| u >= n) {
        return Err(Error::RankOutOfRange {
            requested: bad,
            max: n - 1,
        });
    }

    let mut i0 = Vec::new();
    let mut i1 = Vec::new();
    for unit in 0..n {
        if panel.treatments.get(unit, t_star) == 1 {
            i1.push(unit);
        } else {
            i0.push(unit);
        }
    }
    let m0: Vec<usize> = target
        .iter()
        .copied()
        .filter(|&u| panel.treatments.get(u, t_star) == 0)
        .collect();
    let m1: Vec<usize> = target
        .iter()
        .copied()
        .filter(|&u| panel.treatments.get(u, t_star) == 1)
        .collect();

    let mut common_meas = common_measurements(&panel.treatments);
    let before = common_meas.len();
    common_meas.retain(|(t, _)| *t != t_star);
    let t_star_excluded = common_meas.len() != before;

    Ok(ObservedDesign {
        t_star,
        target_set: target,
        i0,
        i1,
        m0,
        m1,
        common_meas,
        t_star_excluded,
    })
}

/// Build the PCR regression inputs for one arm.
///
/// Requires a nonempty common-measurement set and a nonempty `M^(1-a)`;
/// when `M^(1-a)` is empty the whole imputation term is skipped upstream
/// and no regression is needed.
pub fn build_regression(
    panel: &PanelData,
    design: &ObservedDesign,
    arm: u8,
) -> Result<RegressionInputs> {
    if design.common_meas.is_empty() {
        return Err(Error::NoCommonMeasurements);
    }
    let donor_units = design.donor_units(arm).to_vec();
    if donor_units.is_empty() {
        return Err(Error::DegenerateDesign { arm });
    }
    let impute_for = design.target_units(1 - arm);
    if impute_for.is_empty() {
        return Err(Error::EmptyTargetSet);
    }

    let t_bar = design.common_meas.len();
    let mut response = Vec::with_capacity(t_bar);
    let mut covariates = RealMatrix::zeros(t_bar, donor_units.len());
    for (row, (t, _a_t)) in design.common_meas.iter().enumerate() {
        let mut sum = 0.0;
        for &unit in impute_for {
            sum += panel.outcomes.get(unit, *t);
        }
        response.push(sum);
        for (col, &unit) in donor_units.iter().enumerate() {
            covariates.set(row, col, panel.outcomes.get(unit, *t));
        }
    }

    Ok(RegressionInputs {
        response,
        covariates,
        donor_units,
        arm,
    })
}
