//! Long-format panel CSV: `unit,measurement,treatment,outcome`.
//!
//! Unit and measurement identifiers are external strings mapped to dense
//! indices in order of first appearance; every `(unit, measurement)` cell
//! must be present exactly once.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use factorate_core::assignment::TreatmentMatrix;
use factorate_core::linalg::RealMatrix;
use factorate_core::panel::PanelData;

use crate::config::AppError;
use crate::report::fmt_float;

/// Panel plus the external identifiers it was read with.
#[derive(Debug, Clone)]
pub struct LabeledPanel {
    pub panel: PanelData,
    pub unit_ids: Vec<String>,
    pub measurement_ids: Vec<String>,
}

impl LabeledPanel {
    /// Wrap a panel with positional identifiers `0..N` / `0..T`.
    pub fn with_positional_ids(panel: PanelData) -> Self {
        let unit_ids = (0..panel.n_units()).map(|i| i.to_string()).collect();
        let measurement_ids = (0..panel.n_measurements()).map(|i| i.to_string()).collect();
        LabeledPanel {
            panel,
            unit_ids,
            measurement_ids,
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PanelRow {
    unit: String,
    measurement: String,
    treatment: u8,
    outcome: String,
}

pub fn write_panel_csv<W: Write>(writer: W, labeled: &LabeledPanel) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(writer);
    let panel = &labeled.panel;
    for unit in 0..panel.n_units() {
        for meas in 0..panel.n_measurements() {
            w.serialize(PanelRow {
                unit: labeled.unit_ids[unit].clone(),
                measurement: labeled.measurement_ids[meas].clone(),
                treatment: panel.treatments.get(unit, meas),
                outcome: fmt_float(panel.outcomes.get(unit, meas)),
            })
            .map_err(AppError::from_csv)?;
        }
    }
    w.flush().map_err(|e| AppError::Io(e.to_string()))
}

pub fn write_panel_csv_path(path: &Path, labeled: &LabeledPanel) -> Result<(), AppError> {
    let file = std::fs::File::create(path).map_err(|e| AppError::Io(format!("{path:?}: {e}")))?;
    write_panel_csv(file, labeled)
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<LabeledPanel, AppError> {
    let mut r = csv::Reader::from_reader(reader);
    {
        let headers = r.headers().map_err(AppError::from_csv)?;
        let expected = ["unit", "measurement", "treatment", "outcome"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(AppError::Validation(format!(
                "panel CSV header must be `unit,measurement,treatment,outcome`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }

    let mut unit_ids: Vec<String> = Vec::new();
    let mut meas_ids: Vec<String> = Vec::new();
    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut meas_index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, u8, f64)> = Vec::new();

    for (line, row) in r.deserialize::<PanelRow>().enumerate() {
        let row = row.map_err(AppError::from_csv)?;
        if row.treatment > 1 {
            return Err(AppError::Validation(format!(
                "row {}: treatment must be 0 or 1, got {}",
                line + 2,
                row.treatment
            )));
        }
        let outcome: f64 = row.outcome.trim().parse().map_err(|_| {
            AppError::Validation(format!("row {}: bad outcome `{}`", line + 2, row.outcome))
        })?;
        if !outcome.is_finite() {
            return Err(AppError::Validation(format!(
                "row {}: non-finite outcome",
                line + 2
            )));
        }
        let u = *unit_index.entry(row.unit.clone()).or_insert_with(|| {
            unit_ids.push(row.unit.clone());
            unit_ids.len() - 1
        });
        let m = *meas_index
            .entry(row.measurement.clone())
            .or_insert_with(|| {
                meas_ids.push(row.measurement.clone());
                meas_ids.len() - 1
            });
        cells.push((u, m, row.treatment, outcome));
    }

    let n = unit_ids.len();
    let t = meas_ids.len();
    if n == 0 || t == 0 {
        return Err(AppError::Validation("panel CSV has no data rows".into()));
    }
    if cells.len() != n * t {
        return Err(AppError::Validation(format!(
            "panel must cover every (unit, measurement) cell exactly once: \
             {n} units x {t} measurements needs {} rows, got {}",
            n * t,
            cells.len()
        )));
    }
    let mut seen = vec![false; n * t];
    let mut outcomes = RealMatrix::zeros(n, t);
    let mut treatments = TreatmentMatrix::zeros(n, t);
    for (u, m, a, y) in cells {
        if seen[u * t + m] {
            return Err(AppError::Validation(format!(
                "duplicate cell (unit `{}`, measurement `{}`)",
                unit_ids[u], meas_ids[m]
            )));
        }
        seen[u * t + m] = true;
        outcomes.set(u, m, y);
        treatments.set(u, m, a);
    }

    let panel =
        PanelData::new(outcomes, treatments).map_err(|e| AppError::Validation(e.to_string()))?;
    Ok(LabeledPanel {
        panel,
        unit_ids,
        measurement_ids: meas_ids,
    })
}

pub fn read_panel_csv_path(path: &Path) -> Result<LabeledPanel, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::Io(format!("{path:?}: {e}")))?;
    read_panel_csv(file)
}

/// Column order of `records.csv`; documented in the README and kept
/// stable. Wall-clock timing is deliberately not emitted so record files
/// for the same config are byte-for-byte identical across runs.
pub const RECORDS_HEADER: [&str; 29] = [
    "size_index",
    "n_units",
    "n_measurements",
    "seed_index",
    "seed",
    "t_star",
    "t_bar",
    "n0",
    "n1",
    "m_count",
    "ate_hat",
    "oracle",
    "abs_error",
    "arm0_rank_used",
    "arm0_beta_l1",
    "arm0_beta_l2",
    "arm0_beta_err_l2",
    "arm0_beta_err_proj",
    "arm0_span_residual",
    "arm0_well_balanced_ratio",
    "arm0_subspace_residual",
    "arm1_rank_used",
    "arm1_beta_l1",
    "arm1_beta_l2",
    "arm1_beta_err_l2",
    "arm1_beta_err_proj",
    "arm1_span_residual",
    "arm1_well_balanced_ratio",
    "arm1_subspace_residual",
];

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn arm_fields(d: &crate::harness::ArmDiagnostics) -> [String; 8] {
    [
        d.rank_used.map(|k| k.to_string()).unwrap_or_default(),
        opt_float(d.beta_l1),
        opt_float(d.beta_l2),
        opt_float(d.beta_err_l2),
        opt_float(d.beta_err_proj),
        opt_float(d.span_residual),
        opt_float(d.well_balanced_ratio),
        opt_float(d.subspace_residual),
    ]
}

pub fn write_records_csv<W: Write>(
    writer: W,
    records: &[crate::harness::RunRecord],
) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORDS_HEADER).map_err(AppError::from_csv)?;
    for r in records {
        let mut row: Vec<String> = vec![
            r.size_index.to_string(),
            r.n_units.to_string(),
            r.n_measurements.to_string(),
            r.seed_index.to_string(),
            r.seed.to_string(),
            r.t_star.to_string(),
            r.t_bar.to_string(),
            r.n0.to_string(),
            r.n1.to_string(),
            r.m_count.to_string(),
            fmt_float(r.ate_hat),
            fmt_float(r.oracle),
            fmt_float(r.abs_error),
        ];
        row.extend(arm_fields(&r.arm0));
        row.extend(arm_fields(&r.arm1));
        w.write_record(&row).map_err(AppError::from_csv)?;
    }
    w.flush().map_err(|e| AppError::Io(e.to_string()))
}

/// Minimal record view parsed back from `records.csv`; enough to recompute
/// every summary statistic.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct RecordRow {
    pub size_index: usize,
    pub n_units: usize,
    pub n_measurements: usize,
    pub seed_index: usize,
    pub seed: u64,
    pub ate_hat: f64,
    pub oracle: f64,
    pub abs_error: f64,
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<RecordRow>, AppError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .map(|row| row.map_err(AppError::from_csv))
        .collect()
}

pub fn write_normality_csv<W: Write>(
    writer: W,
    records: &[crate::harness::NormalityRecord],
) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep_index",
        "seed",
        "oracle_target",
        "sigma_bar",
        "ate_hat_oracle_w",
        "z_oracle",
        "ate_hat_pcr",
        "z_pcr",
    ])
    .map_err(AppError::from_csv)?;
    for r in records {
        w.write_record([
            r.rep_index.to_string(),
            r.seed.to_string(),
            fmt_float(r.oracle_target),
            fmt_float(r.sigma_bar),
            fmt_float(r.ate_hat_oracle_w),
            fmt_float(r.z_oracle),
            fmt_float(r.ate_hat_pcr),
            fmt_float(r.z_pcr),
        ])
        .map_err(AppError::from_csv)?;
    }
    w.flush().map_err(|e| AppError::Io(e.to_string()))
}

pub fn write_curve_csv<W: Write>(writer: W, curve: &[(usize, f64)]) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "delta_e_proxy"])
        .map_err(AppError::from_csv)?;
    for (rank, value) in curve {
        w.write_record([rank.to_string(), fmt_float(*value)])
            .map_err(AppError::from_csv)?;
    }
    w.flush().map_err(|e| AppError::Io(e.to_string()))
}
