//! Deterministic serializers: CSV series files and JSON metadata sidecars.
//!
//! Floats are written in Rust's shortest round-trip decimal form so a fixed
//! manifest and seed produce byte-identical files on every platform and
//! worker count. Non-finite values serialize as `NaN`/`inf`/`-inf` in CSV
//! and as `null` in JSON.

use std::path::{Path, PathBuf};

use eteso_core::nalgebra::DMatrix;
use eteso_core::{CompareReport, EnsembleStats, SweepResult, Trajectory};
use serde_json::{json, Value};

use crate::CliError;

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// RFC-4180-style field quoting; numeric fields never need it, but headers
/// and any future text fields pass through here too.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub struct CsvBuilder {
    buf: String,
    columns: usize,
}

impl CsvBuilder {
    pub fn new(header: &[String]) -> Self {
        let mut buf = String::new();
        let cols: Vec<String> = header.iter().map(|h| csv_field(h)).collect();
        buf.push_str(&cols.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        let cols: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
        self.buf.push_str(&cols.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

fn indexed(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("{prefix}{i}")).collect()
}

/// Columns: t, x1..xn, x_ext, xhat1..xhat{n+1}, optionally eta1..eta{n+1}.
pub fn trajectory_csv(traj: &Trajectory, include_eta: bool) -> String {
    let n = traj.order();
    let m = n + 1;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", n));
    header.push("x_ext".to_string());
    header.extend(indexed("xhat", m));
    if include_eta {
        header.extend(indexed("eta", m));
    }
    let mut csv = CsvBuilder::new(&header);
    for rec in 0..traj.times.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push(fmt_f64(traj.times[rec]));
        for v in &traj.x[rec] {
            row.push(fmt_f64(*v));
        }
        row.push(fmt_f64(traj.x_ext[rec]));
        for v in &traj.xhat[rec] {
            row.push(fmt_f64(*v));
        }
        if include_eta {
            for v in &traj.eta[rec] {
                row.push(fmt_f64(*v));
            }
        }
        csv.row(&row);
    }
    csv.finish()
}

/// Columns: k, t_k, held_y, inter_event (blank on the first execution).
pub fn triggers_csv(traj: &Trajectory) -> String {
    let header: Vec<String> = ["k", "t_k", "held_y", "inter_event"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut csv = CsvBuilder::new(&header);
    let mut prev_time: Option<f64> = None;
    for event in &traj.triggers {
        let gap = prev_time.map_or(String::new(), |p| fmt_f64(event.time - p));
        csv.row(&[
            event.k.to_string(),
            fmt_f64(event.time),
            fmt_f64(event.held),
            gap,
        ]);
        prev_time = Some(event.time);
    }
    csv.finish()
}

/// Columns: t, mse_1..mse_{n+1}, ci_1..ci_{n+1}.
pub fn ensemble_csv(stats: &EnsembleStats) -> String {
    let m = stats.mse.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend(indexed("mse_", m));
    header.extend(indexed("ci_", m));
    let mut csv = CsvBuilder::new(&header);
    for rec in 0..stats.times.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push(fmt_f64(stats.times[rec]));
        for v in &stats.mse[rec] {
            row.push(fmt_f64(*v));
        }
        for v in &stats.ci_halfwidth[rec] {
            row.push(fmt_f64(*v));
        }
        csv.row(&row);
    }
    csv.finish()
}

/// Columns: r, tail_mse_i, slope_i, predicted_exponent_i, mean_triggers.
pub fn sweep_csv(result: &SweepResult) -> String {
    let m = result.predicted_exponents.len();
    let mut header = vec!["r".to_string()];
    header.extend(indexed("tail_mse_", m));
    header.extend(indexed("slope_", m));
    header.extend(indexed("predicted_exponent_", m));
    header.push("mean_triggers".to_string());
    let mut csv = CsvBuilder::new(&header);
    for row in &result.rows {
        let mut fields = Vec::with_capacity(header.len());
        fields.push(fmt_f64(row.r));
        for v in &row.tail_mse {
            fields.push(fmt_f64(*v));
        }
        for v in &result.slopes {
            fields.push(fmt_f64(*v));
        }
        for v in &result.predicted_exponents {
            fields.push(fmt_f64(*v));
        }
        fields.push(fmt_f64(row.mean_triggers));
        csv.row(&fields);
    }
    csv.finish()
}

/// Columns: path, linear_triggers, nonlinear_triggers, per-state sup errors.
pub fn compare_paths_csv(report: &CompareReport) -> String {
    let m = report.frac_nonlinear_better.len();
    let mut header = vec![
        "path".to_string(),
        "linear_triggers".to_string(),
        "nonlinear_triggers".to_string(),
        "linear_min_inter_event".to_string(),
        "nonlinear_min_inter_event".to_string(),
    ];
    header.extend(indexed("linear_sup_", m));
    header.extend(indexed("nonlinear_sup_", m));
    let mut csv = CsvBuilder::new(&header);
    for p in &report.per_path {
        let mut fields = Vec::with_capacity(header.len());
        fields.push(p.path_index.to_string());
        fields.push(p.linear_triggers.to_string());
        fields.push(p.nonlinear_triggers.to_string());
        fields.push(fmt_f64(p.linear_min_inter_event));
        fields.push(fmt_f64(p.nonlinear_min_inter_event));
        for v in &p.linear_sup {
            fields.push(fmt_f64(*v));
        }
        for v in &p.nonlinear_sup {
            fields.push(fmt_f64(*v));
        }
        csv.row(&fields);
    }
    csv.finish()
}

/// One summary row over all compared paths.
pub fn compare_summary_csv(report: &CompareReport) -> String {
    let m = report.frac_nonlinear_better.len();
    let mut header = vec![
        "paths".to_string(),
        "mean_linear_triggers".to_string(),
        "mean_nonlinear_triggers".to_string(),
        "trigger_count_ratio".to_string(),
    ];
    header.extend(indexed("frac_nonlinear_better_", m));
    header.extend(indexed("frac_ties_", m));
    let mut csv = CsvBuilder::new(&header);
    let mut fields = vec![
        report.per_path.len().to_string(),
        fmt_f64(report.mean_linear_triggers),
        fmt_f64(report.mean_nonlinear_triggers),
        fmt_f64(report.trigger_count_ratio),
    ];
    for v in &report.frac_nonlinear_better {
        fields.push(fmt_f64(*v));
    }
    for v in &report.frac_ties {
        fields.push(fmt_f64(*v));
    }
    csv.row(&fields);
    csv.finish()
}

pub fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn json_f64_vec(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|v| json_f64(*v)).collect())
}

/// Ensemble-level extras that have no CSV column: histogram, counts, sups.
pub fn ensemble_extras(stats: &EnsembleStats) -> Value {
    json!({
        "paths": stats.paths,
        "tail_window": [stats.tail_window.0, stats.tail_window.1],
        "tail_mse": json_f64_vec(&stats.tail_mse()),
        "trigger_counts": stats.trigger_counts,
        "inter_event_histogram": {
            "min": json_f64(stats.inter_event.min),
            "max": json_f64(stats.inter_event.max),
            "bin_width": json_f64(stats.inter_event.bin_width),
            "counts": stats.inter_event.counts,
            "total": stats.inter_event.total,
        },
        "sup_err_per_path": stats.sup_err.iter().map(|row| json_f64_vec(row)).collect::<Vec<_>>(),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serialization cannot fail");
    s.push('\n');
    s
}

/// Human-readable matrix block for the design report.
pub fn matrix_lines(m: &DMatrix<f64>) -> Vec<String> {
    (0..m.nrows())
        .map(|i| {
            let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
            format!("[ {} ]", row.join("  "))
        })
        .collect()
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json_f64(m[(i, j)])).collect()))
            .collect(),
    )
}
