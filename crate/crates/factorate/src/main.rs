use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use factorate::config::{load_config, parse_rank_strategy, parse_target, AppError, SimulateConfig};
use factorate::csvio::{
    read_panel_csv_path, write_curve_csv, write_normality_csv, write_panel_csv_path,
    write_records_csv, LabeledPanel,
};
use factorate::harness::{
    effective_threads, run_consistency_sweep, run_holder_decay, run_normality_study,
    summarize_sweep, DecayConfig, NormalityConfig, SweepConfig,
};
use factorate::report::fmt_float;

use factorate_core::assignment::assign;
use factorate_core::dgp::build_truth;
use factorate_core::estimator::{estimate, resolve_target_units};
use factorate_core::panel::{design, observe};

#[derive(Parser)]
#[command(
    name = "factorate",
    version,
    about = "Latent-factor counterfactual estimation: synthetic panels, PCR weights, ATT/ATU/ATE"
)]
struct Cli {
    /// Worker threads for the Monte Carlo subcommands
    /// (the FACTORATE_THREADS env var takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel CSV from a config document.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a treatment effect from a long-format panel CSV.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        /// Target measurement index (order of first appearance in the CSV).
        #[arg(long = "t-star")]
        t_star: usize,
        /// att, atu, or ate.
        #[arg(long)]
        target: String,
        /// Rank strategy: fixed:K, energy:F, or hard:M.
        #[arg(long, default_value = "energy:0.999")]
        rank: String,
        /// Output JSON path for the estimate.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON dump of the resolved design (debugging aid).
        #[arg(long = "design-out")]
        design_out: Option<PathBuf>,
    },
    /// Consistency sweep over sizes; writes records.csv and summary.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Asymptotic-normality study; writes records.csv and summary.json.
    Normality {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Rank-decay curve of the smooth outcome family; writes curve.csv.
    Decay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // Bad flags or missing arguments: usage message, exit 1.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("factorate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn ensure_dir(path: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(path).map_err(|e| AppError::Io(format!("{path:?}: {e}")))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| AppError::Validation(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| AppError::Io(format!("{path:?}: {e}")))
}

fn create_file(path: &Path) -> Result<std::fs::File, AppError> {
    std::fs::File::create(path).map_err(|e| AppError::Io(format!("{path:?}: {e}")))
}

fn run(cli: Cli) -> Result<(), AppError> {
    let threads = effective_threads(cli.threads);
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg: SimulateConfig = load_config(&config)?;
            cfg.dgp.validate()?;
            let truth = build_truth(&cfg.dgp)?;
            let a = assign(
                &cfg.mechanism,
                &truth.unit_factors,
                cfg.dgp.n_measurements,
                cfg.dgp.seed,
            )?;
            let panel = observe(&truth, &a)?;
            let labeled = LabeledPanel::with_positional_ids(panel);
            write_panel_csv_path(&out, &labeled)?;
            println!(
                "wrote panel: {} units x {} measurements -> {}",
                labeled.panel.n_units(),
                labeled.panel.n_measurements(),
                out.display()
            );
            Ok(())
        }
        Command::Estimate {
            panel,
            t_star,
            target,
            rank,
            out,
            design_out,
        } => {
            let labeled = read_panel_csv_path(&panel)?;
            let target_spec = parse_target(&target)?;
            let strategy = parse_rank_strategy(&rank)?;
            if t_star >= labeled.panel.n_measurements() {
                return Err(AppError::Validation(format!(
                    "t_star {t_star} out of range (panel has {} measurements)",
                    labeled.panel.n_measurements()
                )));
            }
            let result = estimate(&labeled.panel, t_star, target_spec.clone(), strategy)?;
            write_json(&out, &result)?;
            if let Some(design_path) = design_out {
                let units = resolve_target_units(&labeled.panel, t_star, &target_spec)?;
                let d = design(&labeled.panel, t_star, &units)?;
                write_json(&design_path, &d)?;
            }

            println!("target          {}", target.to_ascii_lowercase());
            println!(
                "t_star          {} (measurement id `{}`)",
                t_star, labeled.measurement_ids[t_star]
            );
            println!("ate_hat         {}", fmt_float(result.ate_hat));
            println!(
                "units           N0={} N1={} M={}",
                result.n0, result.n1, result.m_count
            );
            println!(
                "common meas.    {}{}",
                result.t_bar_len,
                if result.t_star_excluded {
                    " (t_star excluded)"
                } else {
                    ""
                }
            );
            println!(
                "rank used       arm0={} arm1={}",
                result.beta0.rank_used, result.beta1.rank_used
            );
            if result.empty_imputation[0] || result.empty_imputation[1] {
                println!(
                    "note            empty imputation term for arm(s): {}",
                    [0usize, 1]
                        .iter()
                        .filter(|&&a| result.empty_imputation[a])
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            println!("wrote           {}", out.display());
            Ok(())
        }
        Command::Sweep { config, out_dir } => {
            let cfg: SweepConfig = load_config(&config)?;
            let records = run_consistency_sweep(&cfg, threads)?;
            ensure_dir(&out_dir)?;
            write_records_csv(create_file(&out_dir.join("records.csv"))?, &records)?;
            let summary = summarize_sweep(&records);
            write_json(&out_dir.join("summary.json"), &summary)?;
            for s in &summary.per_size {
                println!(
                    "size ({}, {}): n={} median|err|={} iqr={}",
                    s.n_units,
                    s.n_measurements,
                    s.n_records,
                    fmt_float(s.median_abs_error),
                    fmt_float(s.iqr_abs_error)
                );
            }
            println!("wrote {}/records.csv and summary.json", out_dir.display());
            Ok(())
        }
        Command::Normality { config, out_dir } => {
            let cfg: NormalityConfig = load_config(&config)?;
            let out = run_normality_study(&cfg, threads)?;
            ensure_dir(&out_dir)?;
            write_normality_csv(create_file(&out_dir.join("records.csv"))?, &out.records)?;
            write_json(&out_dir.join("summary.json"), &out.summary)?;
            let s = &out.summary;
            if s.degenerate {
                println!("degenerate: all sigma_bar = 0 (noiseless run), z reported as 0");
            }
            println!(
                "oracle weights: mean_z={} sd_z={} coverage95={} ks={}",
                fmt_float(s.mean_z),
                fmt_float(s.sd_z),
                fmt_float(s.coverage95),
                fmt_float(s.ks_stat)
            );
            println!(
                "pcr weights:    mean_z={} sd_z={} coverage95={} ks={}",
                fmt_float(s.mean_z_pcr),
                fmt_float(s.sd_z_pcr),
                fmt_float(s.coverage95_pcr),
                fmt_float(s.ks_stat_pcr)
            );
            println!("wrote {}/records.csv and summary.json", out_dir.display());
            Ok(())
        }
        Command::Decay { config, out_dir } => {
            let cfg: DecayConfig = load_config(&config)?;
            let out = run_holder_decay(&cfg)?;
            if out.linear_family {
                eprintln!(
                    "warning: linear outcome family; the curve is a step to zero at the exact rank"
                );
            }
            ensure_dir(&out_dir)?;
            write_curve_csv(create_file(&out_dir.join("curve.csv"))?, &out.curve)?;
            for (r, v) in &out.curve {
                println!("rank {r}: {}", fmt_float(*v));
            }
            println!("wrote {}/curve.csv", out_dir.display());
            Ok(())
        }
    }
}
