//! Monte Carlo experiment runner: consistency sweeps, the normality study,
//! the smooth-family rank-decay curve, and the noise-scale study.
//!
//! Replications are independent pure tasks keyed by
//! `(base_seed, size_index, seed_index)`, so record sets are invariant to
//! the worker-thread count; outputs are sorted before emission.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use factorate_core::assignment::{assign, AssignmentMechanism};
use factorate_core::dgp::{build_truth, delta_e_proxy, DgpConfig, LatentTruth};
use factorate_core::diagnostics::{
    assumption_report, oracle_ate, oracle_beta, sigma_bar, weight_error, x_lr,
};
use factorate_core::estimator::{ate_hat, estimate, resolve_target_units, TargetSpec};
use factorate_core::panel::{design, observe, ObservedDesign};
use factorate_core::pcr::RankStrategy;
use factorate_core::rng::{tag, Stream};

use crate::config::AppError;
use crate::report::{interquartile_range, ks_statistic_normal, mean, median, sample_sd};

/// Worker count: `FACTORATE_THREADS` overrides the flag, which overrides
/// the machine's available parallelism.
pub fn effective_threads(flag: Option<usize>) -> usize {
    if let Ok(v) = std::env::var("FACTORATE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    if let Some(n) = flag {
        if n >= 1 {
            return n;
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Run `count` independent tasks on a bounded pool; results land at their
/// task index, so the output order never depends on scheduling.
pub fn run_parallel<T, F>(count: usize, threads: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if count == 0 {
        return Vec::new();
    }
    let threads = threads.max(1).min(count);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = task(i);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("task completed"))
        .collect()
}

/// Seed for one replication, independent of execution order.
pub fn replication_seed(base_seed: u64, size_index: usize, seed_index: usize) -> u64 {
    Stream::new(base_seed, tag::REPLICATION)
        .with(size_index as u64)
        .with(seed_index as u64)
        .bits()
}

/// Consistency sweep configuration.
#[derive(Debug, Clone, Deserialize)]
pub struct SweepConfig {
    /// DGP template; `n_units`, `n_measurements`, and `seed` are overridden
    /// per replication.
    pub dgp: DgpConfig,
    pub mechanism: AssignmentMechanism,
    pub target: TargetSpec,
    /// `(N, T)` pairs, strictly increasing in both coordinates.
    pub sizes: Vec<(usize, usize)>,
    pub n_seeds: usize,
    pub rank_strategy: RankStrategy,
    pub base_seed: u64,
    /// Target measurement; defaults to the final one per size.
    #[serde(default)]
    pub t_star: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if self.sizes.is_empty() {
            return Err(AppError::Validation("sizes must be nonempty".into()));
        }
        for w in self.sizes.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(AppError::Validation(
                    "sizes must be strictly increasing in both coordinates".into(),
                ));
            }
        }
        if self.n_seeds == 0 {
            return Err(AppError::Validation("n_seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-arm weight diagnostics recorded for each replication; all `None`
/// when the arm had nothing to impute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ArmDiagnostics {
    pub rank_used: Option<usize>,
    pub beta_l1: Option<f64>,
    pub beta_l2: Option<f64>,
    pub beta_err_l2: Option<f64>,
    pub beta_err_proj: Option<f64>,
    pub span_residual: Option<f64>,
    pub well_balanced_ratio: Option<f64>,
    pub subspace_residual: Option<f64>,
}

/// One replication's record; one row of `records.csv` (the arm diagnostics
/// are emitted as `arm0_*` / `arm1_*` columns there).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub size_index: usize,
    pub n_units: usize,
    pub n_measurements: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub t_star: usize,
    pub t_bar: usize,
    pub n0: usize,
    pub n1: usize,
    pub m_count: usize,
    pub ate_hat: f64,
    pub oracle: f64,
    pub abs_error: f64,
    pub arm0: ArmDiagnostics,
    pub arm1: ArmDiagnostics,
    pub wall_time_s: f64,
}

fn arm_diagnostics(
    truth: &LatentTruth,
    d: &ObservedDesign,
    beta_values: &[f64],
    rank_used: usize,
    skipped: bool,
    arm: u8,
) -> Result<ArmDiagnostics, AppError> {
    if skipped {
        return Ok(ArmDiagnostics::default());
    }
    let rep = assumption_report(truth, d, arm)?;
    let ob = oracle_beta(truth, d, arm)?;
    let x = x_lr(truth, d, arm)?;
    let (err_l2, err_proj) = weight_error(beta_values, &ob.weights.values, &x)?;
    Ok(ArmDiagnostics {
        rank_used: Some(rank_used),
        beta_l1: Some(factorate_core::math::l1_norm(beta_values)),
        beta_l2: Some(factorate_core::math::l2_norm(beta_values)),
        beta_err_l2: Some(err_l2),
        beta_err_proj: Some(err_proj),
        span_residual: Some(ob.span_residual),
        well_balanced_ratio: Some(rep.well_balanced_ratio),
        subspace_residual: Some(rep.subspace_residual),
    })
}

fn run_one_replication(
    cfg: &SweepConfig,
    size_index: usize,
    seed_index: usize,
) -> Result<RunRecord, AppError> {
    let start = Instant::now();
    let (n, t) = cfg.sizes[size_index];
    let seed = replication_seed(cfg.base_seed, size_index, seed_index);
    let mut dgp = cfg.dgp.clone();
    dgp.n_units = n;
    dgp.n_measurements = t;
    dgp.seed = seed;

    let truth = build_truth(&dgp)?;
    let a = assign(&cfg.mechanism, &truth.unit_factors, t, seed)?;
    let panel = observe(&truth, &a)?;
    let t_star = cfg.t_star.unwrap_or(t - 1);

    let result = estimate(&panel, t_star, cfg.target.clone(), cfg.rank_strategy)?;
    let target_units = resolve_target_units(&panel, t_star, &cfg.target)?;
    let oracle = oracle_ate(&truth, &target_units, t_star)?;
    let d = design(&panel, t_star, &target_units)?;

    let arm0 = arm_diagnostics(
        &truth,
        &d,
        &result.beta0.values,
        result.beta0.rank_used,
        result.empty_imputation[0],
        0,
    )?;
    let arm1 = arm_diagnostics(
        &truth,
        &d,
        &result.beta1.values,
        result.beta1.rank_used,
        result.empty_imputation[1],
        1,
    )?;

    Ok(RunRecord {
        size_index,
        n_units: n,
        n_measurements: t,
        seed_index,
        seed,
        t_star,
        t_bar: result.t_bar_len,
        n0: result.n0,
        n1: result.n1,
        m_count: result.m_count,
        ate_hat: result.ate_hat,
        oracle,
        abs_error: (result.ate_hat - oracle).abs(),
        arm0,
        arm1,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Run the full sweep; records come back sorted by `(size, seed)`.
pub fn run_consistency_sweep(
    cfg: &SweepConfig,
    threads: usize,
) -> Result<Vec<RunRecord>, AppError> {
    cfg.validate()?;
    cfg.dgp.validate().map_err(AppError::from)?;
    let total = cfg.sizes.len() * cfg.n_seeds;
    let results = run_parallel(total, threads, |i| {
        let size_index = i / cfg.n_seeds;
        let seed_index = i % cfg.n_seeds;
        run_one_replication(cfg, size_index, seed_index)
    });
    results.into_iter().collect()
}

/// Per-size aggregate of the sweep records.
#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub size_index: usize,
    pub n_units: usize,
    pub n_measurements: usize,
    pub n_records: usize,
    pub median_abs_error: f64,
    pub iqr_abs_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub per_size: Vec<SizeSummary>,
}

pub fn summarize_sweep(records: &[RunRecord]) -> SweepSummary {
    let max_size = records
        .iter()
        .map(|r| r.size_index)
        .max()
        .map_or(0, |m| m + 1);
    let mut per_size = Vec::new();
    for s in 0..max_size {
        let errs: Vec<f64> = records
            .iter()
            .filter(|r| r.size_index == s)
            .map(|r| r.abs_error)
            .collect();
        if errs.is_empty() {
            continue;
        }
        let sample = records.iter().find(|r| r.size_index == s).unwrap();
        per_size.push(SizeSummary {
            size_index: s,
            n_units: sample.n_units,
            n_measurements: sample.n_measurements,
            n_records: errs.len(),
            median_abs_error: median(&errs),
            iqr_abs_error: interquartile_range(&errs),
            mean_abs_error: mean(&errs),
        });
    }
    SweepSummary { per_size }
}

/// Normality study configuration: one fixed size, many replications.
#[derive(Debug, Clone, Deserialize)]
pub struct NormalityConfig {
    pub dgp: DgpConfig,
    pub mechanism: AssignmentMechanism,
    pub target: TargetSpec,
    pub n_reps: usize,
    pub rank_strategy: RankStrategy,
    pub base_seed: u64,
    #[serde(default)]
    pub t_star: Option<usize>,
}

/// One replication's standardized errors: with oracle weights (isolating
/// the CLT claim) and with estimated weights (diagnostic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityRecord {
    pub rep_index: usize,
    pub seed: u64,
    pub oracle_target: f64,
    pub sigma_bar: f64,
    pub ate_hat_oracle_w: f64,
    pub z_oracle: f64,
    pub ate_hat_pcr: f64,
    pub z_pcr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalitySummary {
    pub n_reps: usize,
    /// All σ̄ were zero (noiseless run); z values are reported as 0.
    pub degenerate: bool,
    pub mean_z: f64,
    pub sd_z: f64,
    pub coverage95: f64,
    pub ks_stat: f64,
    pub mean_z_pcr: f64,
    pub sd_z_pcr: f64,
    pub coverage95_pcr: f64,
    pub ks_stat_pcr: f64,
}

pub struct NormalityOutput {
    pub records: Vec<NormalityRecord>,
    pub summary: NormalitySummary,
}

fn run_one_normality(cfg: &NormalityConfig, rep_index: usize) -> Result<NormalityRecord, AppError> {
    let seed = replication_seed(cfg.base_seed, 0, rep_index);
    let mut dgp = cfg.dgp.clone();
    dgp.seed = seed;
    let t = dgp.n_measurements;
    let truth = build_truth(&dgp)?;
    let a = assign(&cfg.mechanism, &truth.unit_factors, t, seed)?;
    let panel = observe(&truth, &a)?;
    let t_star = cfg.t_star.unwrap_or(t - 1);

    let target_units = resolve_target_units(&panel, t_star, &cfg.target)?;
    let d = design(&panel, t_star, &target_units)?;
    let oracle_target = oracle_ate(&truth, &target_units, t_star)?;

    let ob0 = oracle_beta(&truth, &d, 0)?;
    let ob1 = oracle_beta(&truth, &d, 1)?;
    let sb = sigma_bar(&d, &ob0.weights, &ob1.weights, &truth.sigma_tensor)?;
    let m = d.m_count() as f64;

    let ate_oracle_w = ate_hat(&panel, &d, &ob0.weights, &ob1.weights)?;
    let result = estimate(&panel, t_star, cfg.target.clone(), cfg.rank_strategy)?;

    let standardize = |v: f64| {
        if sb.sigma_bar == 0.0 {
            0.0
        } else {
            m.sqrt() / sb.sigma_bar * (v - oracle_target)
        }
    };
    Ok(NormalityRecord {
        rep_index,
        seed,
        oracle_target,
        sigma_bar: sb.sigma_bar,
        ate_hat_oracle_w: ate_oracle_w,
        z_oracle: standardize(ate_oracle_w),
        ate_hat_pcr: result.ate_hat,
        z_pcr: standardize(result.ate_hat),
    })
}

pub fn run_normality_study(
    cfg: &NormalityConfig,
    threads: usize,
) -> Result<NormalityOutput, AppError> {
    if cfg.n_reps < 2 {
        return Err(AppError::Validation("n_reps must be >= 2".into()));
    }
    cfg.dgp.validate().map_err(AppError::from)?;
    let results = run_parallel(cfg.n_reps, threads, |i| run_one_normality(cfg, i));
    let records: Vec<NormalityRecord> = results.into_iter().collect::<Result<_, _>>()?;

    let degenerate = records.iter().all(|r| r.sigma_bar == 0.0);
    let z: Vec<f64> = records.iter().map(|r| r.z_oracle).collect();
    let zp: Vec<f64> = records.iter().map(|r| r.z_pcr).collect();
    let coverage = |v: &[f64]| v.iter().filter(|x| x.abs() <= 1.96).count() as f64 / v.len() as f64;
    let summary = NormalitySummary {
        n_reps: records.len(),
        degenerate,
        mean_z: mean(&z),
        sd_z: sample_sd(&z),
        coverage95: coverage(&z),
        ks_stat: ks_statistic_normal(&z),
        mean_z_pcr: mean(&zp),
        sd_z_pcr: sample_sd(&zp),
        coverage95_pcr: coverage(&zp),
        ks_stat_pcr: ks_statistic_normal(&zp),
    };
    Ok(NormalityOutput { records, summary })
}

/// Rank-decay study configuration.
#[derive(Debug, Clone, Deserialize)]
pub struct DecayConfig {
    pub dgp: DgpConfig,
    pub ranks: Vec<usize>,
}

pub struct DecayOutput {
    pub curve: Vec<(usize, f64)>,
    /// The family is exactly linear, so the curve is trivially a step to
    /// zero; warned, not errored.
    pub linear_family: bool,
}

/// `(r, residual bound)` over the requested ranks.
///
/// The worst-case residual of the best rank-r factor model is nonincreasing
/// in `r` by definition (a smaller factorization zero-pads into a larger
/// one), but the per-rank proxy comes from the Frobenius-optimal truncation
/// and can wiggle upward slightly where the spectrum is flat. The emitted
/// curve is therefore the running minimum over `r' <= r`, which is both
/// monotone and a tighter valid upper bound on the rank-`r` residual.
pub fn run_holder_decay(cfg: &DecayConfig) -> Result<DecayOutput, AppError> {
    if cfg.ranks.is_empty() {
        return Err(AppError::Validation("ranks must be nonempty".into()));
    }
    let mut ranks = cfg.ranks.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let mut dgp = cfg.dgp.clone();
    let linear_family = dgp.outcome_family.is_linear();
    if !linear_family && dgp.linearization_rank.is_none() {
        // The stored linearization is irrelevant for the curve; pick the
        // largest requested rank.
        dgp.linearization_rank = ranks.iter().max().copied();
    }
    dgp.validate().map_err(AppError::from)?;
    let truth = build_truth(&dgp)?;
    let mut curve = Vec::with_capacity(ranks.len());
    let mut best = f64::INFINITY;
    for &r in &ranks {
        best = best.min(delta_e_proxy(&truth, r)?);
        curve.push((r, best));
    }
    Ok(DecayOutput {
        curve,
        linear_family,
    })
}

/// Noise-scale study: the standard deviation across replications of the
/// pure mean-noise error term at two target sizes.
pub struct NoiseScaleStudy {
    pub sd_small: f64,
    pub sd_large: f64,
    pub ratio: f64,
}

/// The mean-noise term `(1/M)(Σ_{M¹} ε¹ − Σ_{M⁰} ε⁰)` per replication.
pub fn run_noise_scale_study(
    dgp_template: &DgpConfig,
    mechanism: &AssignmentMechanism,
    m_small: usize,
    m_large: usize,
    n_reps: usize,
    base_seed: u64,
    threads: usize,
) -> Result<NoiseScaleStudy, AppError> {
    let term_for = |m_units: usize, size_index: usize| -> Result<Vec<f64>, AppError> {
        let results = run_parallel(n_reps, threads, |rep| -> Result<f64, AppError> {
            let seed = replication_seed(base_seed, size_index, rep);
            let mut dgp = dgp_template.clone();
            dgp.n_units = m_units;
            dgp.seed = seed;
            let t = dgp.n_measurements;
            let truth = build_truth(&dgp)?;
            let a = assign(mechanism, &truth.unit_factors, t, seed)?;
            let panel = observe(&truth, &a)?;
            let t_star = t - 1;
            let target: Vec<usize> = (0..m_units).collect();
            let d = design(&panel, t_star, &target)?;
            let mut acc = 0.0;
            for &n in d.target_units(1) {
                acc += truth.noise_tensor.get(n, t_star, 1);
            }
            for &n in d.target_units(0) {
                acc -= truth.noise_tensor.get(n, t_star, 0);
            }
            Ok(acc / d.m_count() as f64)
        });
        results.into_iter().collect()
    };
    let small = term_for(m_small, 0)?;
    let large = term_for(m_large, 1)?;
    let sd_small = sample_sd(&small);
    let sd_large = sample_sd(&large);
    Ok(NoiseScaleStudy {
        sd_small,
        sd_large,
        ratio: sd_large / sd_small,
    })
}
