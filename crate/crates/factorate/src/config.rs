//! Config documents (TOML or JSON) for the CLI subcommands, plus flag
//! parsing helpers.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use factorate_core::assignment::AssignmentMechanism;
use factorate_core::dgp::DgpConfig;
use factorate_core::estimator::TargetSpec;
use factorate_core::pcr::RankStrategy;

/// Application error split by exit code: validation problems exit 1,
/// I/O problems exit 2.
#[derive(Debug, Clone)]
pub enum AppError {
    Validation(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Io(_) => 2,
        }
    }

    /// Classify a csv crate error: I/O wrapping goes to `Io`, everything
    /// else (parse/shape) is bad data.
    pub fn from_csv(e: csv::Error) -> Self {
        if e.is_io_error() {
            AppError::Io(e.to_string())
        } else {
            AppError::Validation(e.to_string())
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Validation(m) => write!(f, "validation error: {m}"),
            AppError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<factorate_core::Error> for AppError {
    fn from(e: factorate_core::Error) -> Self {
        AppError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

/// Config for `simulate`: a data-generating process plus an assignment
/// mechanism.
#[derive(Debug, Clone, Deserialize)]
pub struct SimulateConfig {
    pub dgp: DgpConfig,
    pub mechanism: AssignmentMechanism,
}

/// Load a TOML or JSON config document, chosen by file extension.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::Io(format!("{path:?}: {e}")))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "toml" => toml::from_str(&text).map_err(|e| AppError::Validation(format!("{path:?}: {e}"))),
        "json" => {
            serde_json::from_str(&text).map_err(|e| AppError::Validation(format!("{path:?}: {e}")))
        }
        other => Err(AppError::Validation(format!(
            "unsupported config extension `{other}` (use .toml or .json)"
        ))),
    }
}

/// Parse `fixed:K`, `energy:F`, or `hard:M` into a rank strategy.
pub fn parse_rank_strategy(s: &str) -> Result<RankStrategy, AppError> {
    let (kind, value) = s.split_once(':').ok_or_else(|| {
        AppError::Validation(format!("bad rank strategy `{s}`: expected kind:value"))
    })?;
    match kind {
        "fixed" => {
            let k: usize = value
                .parse()
                .map_err(|_| AppError::Validation(format!("bad fixed rank `{value}`")))?;
            Ok(RankStrategy::Fixed { k })
        }
        "energy" => {
            let fraction: f64 = value
                .parse()
                .map_err(|_| AppError::Validation(format!("bad energy fraction `{value}`")))?;
            Ok(RankStrategy::EnergyThreshold { fraction })
        }
        "hard" => {
            let multiplier: f64 = value
                .parse()
                .map_err(|_| AppError::Validation(format!("bad hard multiplier `{value}`")))?;
            Ok(RankStrategy::HardThreshold { multiplier })
        }
        other => Err(AppError::Validation(format!(
            "unknown rank strategy `{other}` (use fixed/energy/hard)"
        ))),
    }
}

/// Parse the CLI target flag.
pub fn parse_target(s: &str) -> Result<TargetSpec, AppError> {
    match s.to_ascii_lowercase().as_str() {
        "att" => Ok(TargetSpec::Att),
        "atu" => Ok(TargetSpec::Atu),
        "ate" => Ok(TargetSpec::Ate),
        other => Err(AppError::Validation(format!(
            "unknown target `{other}` (use att/atu/ate)"
        ))),
    }
}
