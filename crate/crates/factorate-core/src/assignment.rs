//! Treatment matrices from five assignment mechanisms, each a function of
//! the latent unit factors plus (for the stochastic mechanisms) exogenous
//! randomness keyed by `(seed, n, t)`.
//!
//! Positivity violations are allowed by design; diagnostics report them and
//! estimation does not reject them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::math;
use crate::rng::{tag, Stream};

/// Which measurements a stochastic mechanism operates on; the rest stay
/// under control. Lets a config express "everyone untreated before `t*`"
/// without hard-coding sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSpec {
    #[default]
    All,
    /// Only the final measurement.
    Last,
    Only(Vec<usize>),
}

impl ActiveSpec {
    fn is_active(&self, t: usize, n_measurements: usize) -> bool {
        match self {
            ActiveSpec::All => true,
            ActiveSpec::Last => t + 1 == n_measurements,
            ActiveSpec::Only(set) => set.contains(&t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilitySpec {
    Constant(f64),
    PerMeasurement(Vec<f64>),
}

impl ProbabilitySpec {
    fn at(&self, t: usize) -> f64 {
        match self {
            ProbabilitySpec::Constant(p) => *p,
            ProbabilitySpec::PerMeasurement(v) => v[t],
        }
    }

    fn validate(&self, n_measurements: usize) -> Result<()> {
        let check = |p: f64| {
            if !(0.0..=1.0).contains(&p) {
                Err(Error::InvalidParameter(format!(
                    "probability {p} outside [0, 1]"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ProbabilitySpec::Constant(p) => check(*p),
            ProbabilitySpec::PerMeasurement(v) => {
                if v.len() != n_measurements {
                    return Err(Error::DimensionMismatch {
                        expected: n_measurements,
                        actual: v.len(),
                    });
                }
                v.iter().try_for_each(|p| check(*p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSpec {
    Constant(f64),
    PerMeasurement(Vec<f64>),
}

impl ThresholdSpec {
    fn at(&self, t: usize) -> f64 {
        match self {
            ThresholdSpec::Constant(v) => *v,
            ThresholdSpec::PerMeasurement(v) => v[t],
        }
    }

    fn validate(&self, n_measurements: usize) -> Result<()> {
        match self {
            ThresholdSpec::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter("non-finite threshold".into()));
                }
                Ok(())
            }
            ThresholdSpec::PerMeasurement(v) => {
                if v.len() != n_measurements {
                    return Err(Error::DimensionMismatch {
                        expected: n_measurements,
                        actual: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite threshold".into()));
                }
                Ok(())
            }
        }
    }
}

/// Per-measurement adoption thresholds for staggered adoption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaggerSchedule {
    /// Threshold interpolated linearly from `start` at t = 0 to `end` at
    /// the final measurement.
    Linear {
        start: f64,
        end: f64,
    },
    PerMeasurement(Vec<f64>),
}

impl StaggerSchedule {
    fn at(&self, t: usize, n_measurements: usize) -> f64 {
        match self {
            StaggerSchedule::Linear { start, end } => {
                if n_measurements <= 1 {
                    *start
                } else {
                    start + (end - start) * t as f64 / (n_measurements - 1) as f64
                }
            }
            StaggerSchedule::PerMeasurement(v) => v[t],
        }
    }

    fn validate(&self, n_measurements: usize) -> Result<()> {
        match self {
            StaggerSchedule::Linear { start, end } => {
                if !start.is_finite() || !end.is_finite() {
                    return Err(Error::InvalidParameter("non-finite threshold".into()));
                }
                Ok(())
            }
            StaggerSchedule::PerMeasurement(v) => {
                if v.len() != n_measurements {
                    return Err(Error::DimensionMismatch {
                        expected: n_measurements,
                        actual: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite threshold".into()));
                }
                Ok(())
            }
        }
    }
}

/// Treatment assignment mechanisms.
///
/// Linear scores on the latent factors default to the first coordinate of
/// `U_n` when `weights` is omitted, which keeps confounding strength
/// interpretable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignmentMechanism {
    /// Bernoulli(p_t) independent of the factors.
    Rct {
        p: ProbabilitySpec,
        #[serde(default)]
        active: ActiveSpec,
    },
    /// Bernoulli with propensity `logistic(scale * (<w, U_n> + intercept))`.
    SelectionOnU {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default = "default_selection_intercept")]
        intercept: f64,
        #[serde(default = "default_selection_scale")]
        scale: f64,
        #[serde(default)]
        active: ActiveSpec,
    },
    /// Deterministic: treated iff the score `<w, U_n>` exceeds the threshold.
    RegressionDiscontinuity {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        threshold: ThresholdSpec,
    },
    /// Treated iff `utility gap + noise > delta`; logistic noise recovers
    /// the Luce choice model, zero noise degenerates to a discontinuity rule.
    RandomUtility {
        #[serde(default)]
        gap_weights: Option<Vec<f64>>,
        #[serde(default)]
        gap_intercept: f64,
        noise_scale: f64,
        delta: ThresholdSpec,
    },
    /// Absorbing adoption: treated at `t` iff the scalar projection of
    /// `U_n` exceeded any threshold up to `t`.
    StaggeredAdoption {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        thresholds: StaggerSchedule,
    },
}

fn default_selection_intercept() -> f64 {
    -0.5
}

fn default_selection_scale() -> f64 {
    4.0
}

/// Binary `N × T` treatment matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentMatrix {
    n_units: usize,
    n_measurements: usize,
    data: Vec<u8>,
}

impl TreatmentMatrix {
    pub fn zeros(n_units: usize, n_measurements: usize) -> Self {
        TreatmentMatrix {
            n_units,
            n_measurements,
            data: vec![0; n_units * n_measurements],
        }
    }

    pub fn from_vec(n_units: usize, n_measurements: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n_units * n_measurements {
            return Err(Error::DimensionMismatch {
                expected: n_units * n_measurements,
                actual: data.len(),
            });
        }
        if data.iter().any(|a| *a > 1) {
            return Err(Error::InvalidParameter(
                "treatment entries must be 0 or 1".into(),
            ));
        }
        Ok(TreatmentMatrix {
            n_units,
            n_measurements,
            data,
        })
    }

    #[inline]
    pub fn n_units(&self) -> usize {
        self.n_units
    }

    #[inline]
    pub fn n_measurements(&self) -> usize {
        self.n_measurements
    }

    #[inline]
    pub fn get(&self, unit: usize, measurement: usize) -> u8 {
        self.data[unit * self.n_measurements + measurement]
    }

    #[inline]
    pub fn set(&mut self, unit: usize, measurement: usize, value: u8) {
        debug_assert!(value <= 1);
        self.data[unit * self.n_measurements + measurement] = value;
    }

    /// Number of treated units at a measurement.
    pub fn treated_count(&self, measurement: usize) -> usize {
        (0..self.n_units)
            .filter(|&n| self.get(n, measurement) == 1)
            .count()
    }
}

/// Linear score on the latent factors; defaults to the first coordinate.
fn score(weights: &Option<Vec<f64>>, factors: &RealMatrix, unit: usize) -> Result<f64> {
    match weights {
        None => Ok(factors.get(unit, 0)),
        Some(w) => {
            if w.len() != factors.cols() {
                return Err(Error::DimensionMismatch {
                    expected: factors.cols(),
                    actual: w.len(),
                });
            }
            Ok(math::dot(w, factors.row(unit)))
        }
    }
}

/// Generate a treatment matrix. Deterministic given `(mech, factors, seed)`;
/// the discontinuity and staggered mechanisms use no exogenous randomness at
/// all, and the randomized trial ignores the factors.
pub fn assign(
    mech: &AssignmentMechanism,
    unit_factors: &RealMatrix,
    n_measurements: usize,
    seed: u64,
) -> Result<TreatmentMatrix> {
    let n = unit_factors.rows();
    if n == 0 || n_measurements == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut a = TreatmentMatrix::zeros(n, n_measurements);
    let s = Stream::new(seed, tag::ASSIGNMENT);

    match mech {
        AssignmentMechanism::Rct { p, active } => {
            p.validate(n_measurements)?;
            for unit in 0..n {
                let sn = s.with(unit as u64);
                for t in 0..n_measurements {
                    if !active.is_active(t, n_measurements) {
                        continue;
                    }
                    let v = sn.with(t as u64).uniform();
                    a.set(unit, t, u8::from(v < p.at(t)));
                }
            }
        }
        AssignmentMechanism::SelectionOnU {
            weights,
            intercept,
            scale,
            active,
        } => {
            if !intercept.is_finite() || !scale.is_finite() {
                return Err(Error::InvalidParameter(
                    "non-finite propensity parameter".into(),
                ));
            }
            for unit in 0..n {
                let prop =
                    math::logistic(scale * (score(weights, unit_factors, unit)? + intercept));
                let sn = s.with(unit as u64);
                for t in 0..n_measurements {
                    if !active.is_active(t, n_measurements) {
                        continue;
                    }
                    let v = sn.with(t as u64).uniform();
                    a.set(unit, t, u8::from(v < prop));
                }
            }
        }
        AssignmentMechanism::RegressionDiscontinuity { weights, threshold } => {
            threshold.validate(n_measurements)?;
            for unit in 0..n {
                let x = score(weights, unit_factors, unit)?;
                for t in 0..n_measurements {
                    a.set(unit, t, u8::from(x > threshold.at(t)));
                }
            }
        }
        AssignmentMechanism::RandomUtility {
            gap_weights,
            gap_intercept,
            noise_scale,
            delta,
        } => {
            if !noise_scale.is_finite() || *noise_scale < 0.0 {
                return Err(Error::InvalidParameter(
                    "noise_scale must be finite and >= 0".into(),
                ));
            }
            delta.validate(n_measurements)?;
            for unit in 0..n {
                let gap = score(gap_weights, unit_factors, unit)? + gap_intercept;
                let sn = s.with(unit as u64);
                for t in 0..n_measurements {
                    let nu = if *noise_scale == 0.0 {
                        0.0
                    } else {
                        noise_scale * sn.with(t as u64).standard_logistic()
                    };
                    a.set(unit, t, u8::from(gap + nu > delta.at(t)));
                }
            }
        }
        AssignmentMechanism::StaggeredAdoption {
            weights,
            thresholds,
        } => {
            thresholds.validate(n_measurements)?;
            for unit in 0..n {
                let x = score(weights, unit_factors, unit)?;
                // Adoption is absorbing: compare against the running
                // minimum threshold.
                let mut min_theta = f64::INFINITY;
                for t in 0..n_measurements {
                    min_theta = min_theta.min(thresholds.at(t, n_measurements));
                    a.set(unit, t, u8::from(x > min_theta));
                }
            }
        }
    }
    Ok(a)
}

/// Sanity report for a generated treatment matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismDiagnostics {
    /// Treated unit count per measurement.
    pub treated_per_measurement: Vec<usize>,
    /// Smallest and largest per-measurement treated fraction (the empirical
    /// propensity range; 0 or 1 indicates a positivity violation).
    pub min_propensity: f64,
    pub max_propensity: f64,
    /// First treated measurement per unit, `None` if never treated.
    pub adoption_times: Vec<Option<usize>>,
    /// Whether every row is nondecreasing (absorbing adoption pattern).
    pub absorbing_rows: bool,
}

pub fn mechanism_diagnostics(a: &TreatmentMatrix) -> MechanismDiagnostics {
    let tt = a.n_measurements();
    let n = a.n_units();
    let treated_per_measurement: Vec<usize> = (0..tt).map(|t| a.treated_count(t)).collect();
    let fractions: Vec<f64> = treated_per_measurement
        .iter()
        .map(|c| *c as f64 / n as f64)
        .collect();
    let min_propensity = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let max_propensity = fractions.iter().copied().fold(0.0, f64::max);

    let mut absorbing_rows = true;
    let adoption_times = (0..n)
        .map(|unit| {
            let mut first = None;
            for t in 0..tt {
                let treated = a.get(unit, t) == 1;
                if treated && first.is_none() {
                    first = Some(t);
                }
                if !treated && first.is_some() {
                    absorbing_rows = false;
                }
            }
            first
        })
        .collect();

    MechanismDiagnostics {
        treated_per_measurement,
        min_propensity,
        max_propensity,
        adoption_times,
        absorbing_rows,
    }
}
