//! Simulation ground truth: latent unit factors, outcome mean functions from
//! five model families, noise draws, and the full potential-outcome tensor.
//!
//! Everything generated here is a pure function of `(config, seed)`; draws
//! are keyed by `(seed, tag, n, t, a)` so results do not depend on
//! iteration order or thread count.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank_r_max_error, svd, RealMatrix};
use crate::math;
use crate::rng::{tag, Stream};

/// Dense `N × T × 2` tensor indexed by `(unit, measurement, arm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n_units: usize,
    n_measurements: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n_units: usize, n_measurements: usize) -> Self {
        Tensor3 {
            n_units,
            n_measurements,
            data: vec![0.0; n_units * n_measurements * 2],
        }
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
    pub fn get(&self, unit: usize, measurement: usize, arm: u8) -> f64 {
        self.data[(unit * self.n_measurements + measurement) * 2 + arm as usize]
    }

    #[inline]
    pub fn set(&mut self, unit: usize, measurement: usize, arm: u8, value: f64) {
        self.data[(unit * self.n_measurements + measurement) * 2 + arm as usize] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |acc, x| acc.max(math::abs(*x)))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Law for a scalar coefficient. `Uniform` maps a latent coordinate
/// affinely onto `[low, high)`, so unit-side coefficients remain exact
/// functions of the latent confounder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoefLaw {
    Uniform { low: f64, high: f64 },
    Constant { value: f64 },
}

impl CoefLaw {
    pub fn default_uniform() -> Self {
        CoefLaw::Uniform {
            low: -1.0,
            high: 1.0,
        }
    }

    /// Map a latent coordinate in `[0, 1)` to a coefficient.
    fn map_latent(&self, u: f64) -> f64 {
        match *self {
            CoefLaw::Uniform { low, high } => low + (high - low) * u,
            CoefLaw::Constant { value } => value,
        }
    }

    /// Draw a measurement-side coefficient from the stream.
    fn draw(&self, s: Stream) -> f64 {
        match *self {
            CoefLaw::Uniform { low, high } => s.uniform_in(low, high),
            CoefLaw::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CoefLaw::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform law needs finite low <= high, got [{low}, {high})"
                    )));
                }
            }
            CoefLaw::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite constant {value}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn default_law() -> CoefLaw {
    CoefLaw::default_uniform()
}

fn default_treatment_coef() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

/// Smooth link mapping all reals into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logistic,
    Probit,
}

impl Link {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Link::Logistic => math::logistic(x),
            Link::Probit => math::normal_cdf(x),
        }
    }
}

/// Outcome mean model families.
///
/// The first four are exact linear factor models; `BinaryChoice` is a smooth
/// nonlinear family whose linearization is obtained by SVD truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OutcomeFamily {
    /// `f_{t,a}(U_n) = <a_vec(a), beta_n> + mu_n + w_t` with heterogeneous
    /// treatment coefficients; exact rank `treat_dim + 2`.
    TwoWayFe {
        treat_dim: usize,
        #[serde(default = "default_law")]
        effect_law: CoefLaw,
        #[serde(default = "default_law")]
        unit_law: CoefLaw,
        #[serde(default = "default_law")]
        time_law: CoefLaw,
    },
    /// `f_{t,a}(U_n) = a * treatment_coef + <mu_n, w_t>`; exact rank
    /// `factor_dim + 1`.
    InteractiveFe {
        factor_dim: usize,
        #[serde(default = "default_treatment_coef")]
        treatment_coef: f64,
        #[serde(default = "default_law")]
        unit_law: CoefLaw,
        #[serde(default = "default_law")]
        time_law: CoefLaw,
    },
    /// `f_{t,a}(U_n) = <mu_n, w_t^{(a)}>` with arm-specific measurement
    /// factors; exact rank `factor_dim`.
    TensorFactor {
        factor_dim: usize,
        #[serde(default = "default_law")]
        unit_law: CoefLaw,
        #[serde(default = "default_law")]
        time_law: CoefLaw,
    },
    /// `f_{t,a}(U_n) = sum_l alpha_{n,l} b_l(a, X_t)` over monomial basis
    /// functions in `(a, X_t)` up to `degree`; exact rank `n_basis`.
    Dictionary {
        n_basis: usize,
        degree: usize,
        #[serde(default = "default_law")]
        unit_law: CoefLaw,
        #[serde(default = "default_law")]
        time_law: CoefLaw,
    },
    /// `f_{t,a}(U_n) = link(scale * (<mu_n, w_t^{(a)}> + a * treatment_coef))`
    /// with `mu_n = 2 U_n - 1`; smooth and nonlinear, approximated at a
    /// caller-chosen `linearization_rank`.
    BinaryChoice {
        link: Link,
        #[serde(default = "default_treatment_coef")]
        treatment_coef: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

impl OutcomeFamily {
    /// Latent dimension the family requires, `None` when any `q >= 1` works.
    pub fn required_latent_dim(&self) -> Option<usize> {
        match *self {
            OutcomeFamily::TwoWayFe { treat_dim, .. } => Some(treat_dim + 1),
            OutcomeFamily::InteractiveFe { factor_dim, .. } => Some(factor_dim),
            OutcomeFamily::TensorFactor { factor_dim, .. } => Some(factor_dim),
            OutcomeFamily::Dictionary { n_basis, .. } => Some(n_basis),
            OutcomeFamily::BinaryChoice { .. } => None,
        }
    }

    /// Exact linear-factor rank, `None` for the nonlinear family.
    pub fn exact_rank(&self) -> Option<usize> {
        match *self {
            OutcomeFamily::TwoWayFe { treat_dim, .. } => Some(treat_dim + 2),
            OutcomeFamily::InteractiveFe { factor_dim, .. } => Some(factor_dim + 1),
            OutcomeFamily::TensorFactor { factor_dim, .. } => Some(factor_dim),
            OutcomeFamily::Dictionary { n_basis, .. } => Some(n_basis),
            OutcomeFamily::BinaryChoice { .. } => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, OutcomeFamily::BinaryChoice { .. })
    }

    fn validate(&self, latent_dim: usize) -> Result<()> {
        if let Some(required) = self.required_latent_dim() {
            if latent_dim != required {
                return Err(Error::InvalidParameter(format!(
                    "family needs latent_dim {required}, config has {latent_dim}"
                )));
            }
        }
        match self {
            OutcomeFamily::TwoWayFe {
                treat_dim,
                effect_law,
                unit_law,
                time_law,
            } => {
                if *treat_dim == 0 {
                    return Err(Error::InvalidParameter("treat_dim must be >= 1".into()));
                }
                effect_law.validate()?;
                unit_law.validate()?;
                time_law.validate()
            }
            OutcomeFamily::InteractiveFe {
                factor_dim,
                treatment_coef,
                unit_law,
                time_law,
            } => {
                if *factor_dim == 0 {
                    return Err(Error::InvalidParameter("factor_dim must be >= 1".into()));
                }
                if !treatment_coef.is_finite() {
                    return Err(Error::InvalidParameter("non-finite treatment_coef".into()));
                }
                unit_law.validate()?;
                time_law.validate()
            }
            OutcomeFamily::TensorFactor {
                factor_dim,
                unit_law,
                time_law,
            } => {
                if *factor_dim == 0 {
                    return Err(Error::InvalidParameter("factor_dim must be >= 1".into()));
                }
                unit_law.validate()?;
                time_law.validate()
            }
            OutcomeFamily::Dictionary {
                n_basis,
                degree,
                unit_law,
                time_law,
            } => {
                if *n_basis == 0 {
                    return Err(Error::InvalidParameter("n_basis must be >= 1".into()));
                }
                // Monomials a^i x^j with i in {0,1}, j <= degree.
                let available = 2 * (degree + 1);
                if *n_basis > available {
                    return Err(Error::InvalidParameter(format!(
                        "n_basis {n_basis} exceeds {available} monomials at degree {degree}"
                    )));
                }
                unit_law.validate()?;
                time_law.validate()
            }
            OutcomeFamily::BinaryChoice {
                treatment_coef,
                scale,
                ..
            } => {
                if !treatment_coef.is_finite() || !scale.is_finite() {
                    return Err(Error::InvalidParameter(
                        "non-finite binary-choice coefficient".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian,
    UniformBounded,
}

/// Mean-zero noise with per-`(n, t, a)` scale `sigma <= sigma_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub law: NoiseLaw,
    pub sigma_max: f64,
    /// Optional per-arm multipliers in `[0, 1]` applied to `sigma_max`.
    #[serde(default)]
    pub arm_scales: Option<[f64; 2]>,
}

impl NoiseSpec {
    pub fn gaussian(sigma_max: f64) -> Self {
        NoiseSpec {
            law: NoiseLaw::Gaussian,
            sigma_max,
            arm_scales: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_max.is_finite() || self.sigma_max < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma_max must be finite and >= 0, got {}",
                self.sigma_max
            )));
        }
        if let Some(scales) = self.arm_scales {
            for s in scales {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidParameter(format!(
                        "arm scale {s} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sigma(&self, arm: u8) -> f64 {
        match self.arm_scales {
            Some(scales) => self.sigma_max * scales[arm as usize],
            None => self.sigma_max,
        }
    }
}

/// Full synthetic data-generating configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n_units: usize,
    pub n_measurements: usize,
    pub latent_dim: usize,
    pub outcome_family: OutcomeFamily,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Rank of the SVD linearization for nonlinear families; ignored by the
    /// exact linear families.
    #[serde(default)]
    pub linearization_rank: Option<usize>,
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_measurements == 0 {
            return Err(Error::InvalidParameter(
                "n_units and n_measurements must be >= 1".into(),
            ));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidParameter("latent_dim must be >= 1".into()));
        }
        self.outcome_family.validate(self.latent_dim)?;
        self.noise.validate()
    }
}

/// Simulation-side ground truth.
///
/// The potential outcome is `mean + noise` exactly; `approx_tensor` holds
/// the linearization residual `eta = mean - <lambda_n, rho_{t,a}>`, which is
/// identically zero for the linear families.
#[derive(Debug, Clone)]
pub struct LatentTruth {
    /// `N × q` latent confounders with rows in `[0, 1)^q`.
    pub unit_factors: RealMatrix,
    /// `N × r` linear unit factors (lambda).
    pub lin_unit_factors: RealMatrix,
    /// `2T × r` linear measurement factors (rho), row index `a * T + t`.
    pub lin_meas_factors: RealMatrix,
    /// `f_{t,a}(U_n)`.
    pub mean_tensor: Tensor3,
    /// Linearization residuals `eta`.
    pub approx_tensor: Tensor3,
    /// Realized noise draws `epsilon`.
    pub noise_tensor: Tensor3,
    /// Noise scales `sigma`.
    pub sigma_tensor: Tensor3,
    /// Rank of the stored linearization.
    pub lin_rank: usize,
}

impl LatentTruth {
    pub fn n_units(&self) -> usize {
        self.mean_tensor.n_units()
    }

    pub fn n_measurements(&self) -> usize {
        self.mean_tensor.n_measurements()
    }

    /// Potential outcome `Y^{(a)}_{n,t} = f_{t,a}(U_n) + eps^{(a)}_{n,t}`.
    pub fn potential_outcome(&self, unit: usize, measurement: usize, arm: u8) -> f64 {
        self.mean_tensor.get(unit, measurement, arm) + self.noise_tensor.get(unit, measurement, arm)
    }

    /// Linear measurement factor `rho_{t,a}`.
    pub fn rho(&self, measurement: usize, arm: u8) -> &[f64] {
        self.lin_meas_factors
            .row(arm as usize * self.n_measurements() + measurement)
    }

    /// Linear unit factor `lambda_n`.
    pub fn lambda(&self, unit: usize) -> &[f64] {
        self.lin_unit_factors.row(unit)
    }

    /// Worst linearization residual `max |eta|` of the stored factors.
    pub fn max_approx_error(&self) -> f64 {
        self.approx_tensor.max_abs()
    }

    /// Mean tensor flattened to `N × 2T` with column index `a * T + t`.
    pub fn flatten_mean(&self) -> RealMatrix {
        flatten_tensor(&self.mean_tensor)
    }
}

fn flatten_tensor(t: &Tensor3) -> RealMatrix {
    let n = t.n_units();
    let tt = t.n_measurements();
    let mut m = RealMatrix::zeros(n, 2 * tt);
    for unit in 0..n {
        for meas in 0..tt {
            for arm in 0..2u8 {
                m.set(unit, arm as usize * tt + meas, t.get(unit, meas, arm));
            }
        }
    }
    m
}

/// Draw the `N × q` latent unit factors, uniform on `[0, 1)^q`.
pub fn sample_unit_factors(cfg: &DgpConfig) -> Result<RealMatrix> {
    cfg.validate()?;
    let s = Stream::new(cfg.seed, tag::UNIT_FACTORS);
    let mut m = RealMatrix::zeros(cfg.n_units, cfg.latent_dim);
    for n in 0..cfg.n_units {
        let sn = s.with(n as u64);
        for j in 0..cfg.latent_dim {
            m.set(n, j, sn.with(j as u64).uniform());
        }
    }
    Ok(m)
}

/// Scale tensor `sigma^{(a)}_{n,t}` implied by the noise spec.
pub fn sigma_tensor(spec: &NoiseSpec, n_units: usize, n_measurements: usize) -> Result<Tensor3> {
    spec.validate()?;
    let mut out = Tensor3::zeros(n_units, n_measurements);
    for n in 0..n_units {
        for t in 0..n_measurements {
            for arm in 0..2u8 {
                out.set(n, t, arm, spec.sigma(arm));
            }
        }
    }
    Ok(out)
}

/// Draw the mean-zero noise tensor, independent across `(n, t, a)`.
pub fn sample_noise(
    spec: &NoiseSpec,
    n_units: usize,
    n_measurements: usize,
    seed: u64,
) -> Result<Tensor3> {
    spec.validate()?;
    let s = Stream::new(seed, tag::NOISE);
    let mut out = Tensor3::zeros(n_units, n_measurements);
    for n in 0..n_units {
        let sn = s.with(n as u64);
        for t in 0..n_measurements {
            let st = sn.with(t as u64);
            for arm in 0..2u8 {
                let sigma = spec.sigma(arm);
                if sigma == 0.0 {
                    continue;
                }
                let sa = st.with(arm as u64);
                let draw = match spec.law {
                    NoiseLaw::Gaussian => sa.normal(),
                    // Half-width sqrt(3) gives unit standard deviation.
                    NoiseLaw::UniformBounded => sa.uniform_in(-math::sqrt(3.0), math::sqrt(3.0)),
                };
                out.set(n, t, arm, sigma * draw);
            }
        }
    }
    Ok(out)
}

/// Build the full simulation ground truth for a configuration.
pub fn build_truth(cfg: &DgpConfig) -> Result<LatentTruth> {
    cfg.validate()?;
    let n = cfg.n_units;
    let t = cfg.n_measurements;
    let unit_factors = sample_unit_factors(cfg)?;
    let meas_stream = Stream::new(cfg.seed, tag::MEAS_COEFS);

    let (lin_unit_factors, lin_meas_factors) = match &cfg.outcome_family {
        OutcomeFamily::TwoWayFe {
            treat_dim,
            effect_law,
            unit_law,
            time_law,
        } => {
            let p = *treat_dim;
            // Fixed treatment vector for arm 1; arm 0 is the zero vector.
            let a1: Vec<f64> = (0..p)
                .map(|j| meas_stream.with(0).with(j as u64).uniform_in(-1.0, 1.0))
                .collect();
            let mut lambda = RealMatrix::zeros(n, p + 2);
            for unit in 0..n {
                for j in 0..p {
                    lambda.set(unit, j, effect_law.map_latent(unit_factors.get(unit, j)));
                }
                lambda.set(unit, p, unit_law.map_latent(unit_factors.get(unit, p)));
                lambda.set(unit, p + 1, 1.0);
            }
            let mut rho = RealMatrix::zeros(2 * t, p + 2);
            for meas in 0..t {
                let w = time_law.draw(meas_stream.with(1).with(meas as u64));
                for arm in 0..2usize {
                    let row = arm * t + meas;
                    for j in 0..p {
                        rho.set(row, j, if arm == 1 { a1[j] } else { 0.0 });
                    }
                    rho.set(row, p, 1.0);
                    rho.set(row, p + 1, w);
                }
            }
            (lambda, rho)
        }
        OutcomeFamily::InteractiveFe {
            factor_dim,
            treatment_coef,
            unit_law,
            time_law,
        } => {
            let k = *factor_dim;
            let mut lambda = RealMatrix::zeros(n, k + 1);
            for unit in 0..n {
                lambda.set(unit, 0, 1.0);
                for j in 0..k {
                    lambda.set(unit, j + 1, unit_law.map_latent(unit_factors.get(unit, j)));
                }
            }
            let mut rho = RealMatrix::zeros(2 * t, k + 1);
            for meas in 0..t {
                let w: Vec<f64> = (0..k)
                    .map(|j| time_law.draw(meas_stream.with(meas as u64).with(j as u64)))
                    .collect();
                for arm in 0..2usize {
                    let row = arm * t + meas;
                    rho.set(row, 0, arm as f64 * treatment_coef);
                    for j in 0..k {
                        rho.set(row, j + 1, w[j]);
                    }
                }
            }
            (lambda, rho)
        }
        OutcomeFamily::TensorFactor {
            factor_dim,
            unit_law,
            time_law,
        } => {
            let k = *factor_dim;
            let mut lambda = RealMatrix::zeros(n, k);
            for unit in 0..n {
                for j in 0..k {
                    lambda.set(unit, j, unit_law.map_latent(unit_factors.get(unit, j)));
                }
            }
            let mut rho = RealMatrix::zeros(2 * t, k);
            for meas in 0..t {
                for arm in 0..2usize {
                    let row = arm * t + meas;
                    for j in 0..k {
                        let s = meas_stream
                            .with(meas as u64)
                            .with(arm as u64)
                            .with(j as u64);
                        rho.set(row, j, time_law.draw(s));
                    }
                }
            }
            (lambda, rho)
        }
        OutcomeFamily::Dictionary {
            n_basis,
            unit_law,
            time_law,
            ..
        } => {
            let l = *n_basis;
            let mut lambda = RealMatrix::zeros(n, l);
            for unit in 0..n {
                for j in 0..l {
                    lambda.set(unit, j, unit_law.map_latent(unit_factors.get(unit, j)));
                }
            }
            let mut rho = RealMatrix::zeros(2 * t, l);
            for meas in 0..t {
                let x = time_law.draw(meas_stream.with(meas as u64));
                for arm in 0..2usize {
                    let row = arm * t + meas;
                    for li in 0..l {
                        rho.set(row, li, monomial(li, arm as f64, x));
                    }
                }
            }
            (lambda, rho)
        }
        OutcomeFamily::BinaryChoice { .. } => {
            // Placeholders; replaced by the SVD linearization below.
            (RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0))
        }
    };

    // Mean tensor. For linear families it is defined as the inner product of
    // the stored factors so the residual is exactly zero.
    let mut mean_tensor = Tensor3::zeros(n, t);
    let mut approx_tensor = Tensor3::zeros(n, t);
    let lin_rank;
    let (lin_unit_factors, lin_meas_factors) = if cfg.outcome_family.is_linear() {
        lin_rank = cfg.outcome_family.exact_rank().unwrap();
        for unit in 0..n {
            let lam = lin_unit_factors.row(unit);
            for meas in 0..t {
                for arm in 0..2u8 {
                    let rho = lin_meas_factors.row(arm as usize * t + meas);
                    mean_tensor.set(unit, meas, arm, math::dot(lam, rho));
                }
            }
        }
        (lin_unit_factors, lin_meas_factors)
    } else {
        let OutcomeFamily::BinaryChoice {
            link,
            treatment_coef,
            scale,
        } = &cfg.outcome_family
        else {
            unreachable!()
        };
        let q = cfg.latent_dim;
        for unit in 0..n {
            let mu: Vec<f64> = (0..q)
                .map(|j| 2.0 * unit_factors.get(unit, j) - 1.0)
                .collect();
            for meas in 0..t {
                for arm in 0..2u8 {
                    let mut score = arm as f64 * treatment_coef;
                    for j in 0..q {
                        let w = meas_stream
                            .with(meas as u64)
                            .with(arm as u64)
                            .with(j as u64)
                            .uniform_in(-1.0, 1.0);
                        score += mu[j] * w;
                    }
                    mean_tensor.set(unit, meas, arm, link.apply(scale * score));
                }
            }
        }
        let r = cfg
            .linearization_rank
            .ok_or(Error::MissingLinearizationRank)?;
        let flat = flatten_tensor(&mean_tensor);
        let max_rank = n.min(2 * t);
        if r == 0 || r > max_rank {
            return Err(Error::RankOutOfRange {
                requested: r,
                max: max_rank,
            });
        }
        let f = svd(&flat)?;
        // lambda_n absorbs the singular values, rho rows come from V.
        let mut lambda = RealMatrix::zeros(n, r);
        for unit in 0..n {
            for l in 0..r {
                lambda.set(unit, l, f.left.get(unit, l) * f.singular_values[l]);
            }
        }
        let mut rho = RealMatrix::zeros(2 * t, r);
        for col in 0..2 * t {
            for l in 0..r {
                rho.set(col, l, f.right.get(col, l));
            }
        }
        for unit in 0..n {
            let lam = lambda.row(unit);
            for meas in 0..t {
                for arm in 0..2u8 {
                    let rho_row = rho.row(arm as usize * t + meas);
                    let eta = mean_tensor.get(unit, meas, arm) - math::dot(lam, rho_row);
                    approx_tensor.set(unit, meas, arm, eta);
                }
            }
        }
        lin_rank = r;
        (lambda, rho)
    };

    let noise_tensor = sample_noise(&cfg.noise, n, t, cfg.seed)?;
    let sigma = sigma_tensor(&cfg.noise, n, t)?;

    Ok(LatentTruth {
        unit_factors,
        lin_unit_factors,
        lin_meas_factors,
        mean_tensor,
        approx_tensor,
        noise_tensor,
        sigma_tensor: sigma,
        lin_rank,
    })
}

/// Monomial basis `a^i x^j` with `i = l % 2`, `j = l / 2`.
fn monomial(l: usize, a: f64, x: f64) -> f64 {
    let i = l % 2;
    let j = l / 2;
    let ai = if i == 0 { 1.0 } else { a };
    ai * math::powi(x, j as i32)
}

/// Max-entrywise rank-`r` approximation error of the flattened mean matrix.
/// This upper-bounds the max-norm-optimal residual of any rank-`r` linear
/// factor model.
pub fn delta_e_proxy(truth: &LatentTruth, r: usize) -> Result<f64> {
    rank_r_max_error(&truth.flatten_mean(), r)
}

/// Optional 0/1 realization `1{e <= f_{t,a}(U_n)}` with `e ~ U[0,1]`.
///
/// Only meaningful when the mean tensor lies in `[0, 1]` (the binary-choice
/// family); estimation always consumes the additive form instead.
pub fn binary_realization(truth: &LatentTruth, seed: u64) -> Result<Tensor3> {
    let n = truth.n_units();
    let t = truth.n_measurements();
    let s = Stream::new(seed, tag::BINARY_REALIZATION);
    let mut out = Tensor3::zeros(n, t);
    for unit in 0..n {
        let sn = s.with(unit as u64);
        for meas in 0..t {
            let st = sn.with(meas as u64);
            for arm in 0..2u8 {
                let p = truth.mean_tensor.get(unit, meas, arm);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!(
                        "mean {p} outside [0, 1]; binary realization needs a probability mean"
                    )));
                }
                let e = st.with(arm as u64).uniform();
                out.set(unit, meas, arm, if e <= p { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(out)
}
