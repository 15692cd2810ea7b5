//! Per-epoch CSV logs and JSON run summaries.
//!
//! Floats are written in Rust's shortest round-trip form, so parsing a log
//! back recovers every value bit for bit. Skipped metrics are empty fields.

use std::path::Path;

use nc_core::metrics::{MetricSuite, METRIC_NAMES};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{write_file, HarnessError, Result};
use crate::trainer::{MetricRecord, RunStatus, TrainOutcome};

pub const CSV_HEADER: [&str; 21] = [
    "epoch",
    "lr",
    "train_loss",
    "train_acc",
    "nc0",
    "nc0_alpha",
    "nc0_normalized",
    "nc1",
    "nc2",
    "nc2n",
    "nc2a",
    "nc2w",
    "nc2wn",
    "nc2wa",
    "nc2m",
    "nc3",
    "nc4",
    "sigma_min_w",
    "sigma_avg_w",
    "sigma_min_m",
    "sigma_avg_m",
];

pub(crate) fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record_fields(r: &MetricRecord) -> Vec<String> {
    let mut f = vec![
        r.epoch.to_string(),
        r.lr.to_string(),
        r.train_loss.to_string(),
        r.train_acc.to_string(),
    ];
    f.extend(r.metrics.values().into_iter().map(opt_field));
    f.extend(
        [r.sigma_min_w, r.sigma_avg_w, r.sigma_min_m, r.sigma_avg_m]
            .into_iter()
            .map(opt_field),
    );
    f
}

/// The whole log as CSV text, header first.
pub fn records_to_csv(records: &[MetricRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record(record_fields(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn parse_opt(s: &str, col: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|e| {
        HarnessError::invalid(format!("record {line}, column {col}: {s:?}: {e}"))
    })
}

fn parse_req(s: &str, col: &str, line: usize) -> Result<f64> {
    parse_opt(s, col, line)?
        .ok_or_else(|| HarnessError::invalid(format!("record {line}, column {col} is empty")))
}

/// Inverse of [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| HarnessError::csv("<memory>", e))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(HarnessError::invalid("unexpected CSV header"));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(|e| HarnessError::csv("<memory>", e))?;
        let line = i + 2;
        let cell = |j: usize| row.get(j).unwrap_or("");
        let epoch = cell(0)
            .parse()
            .map_err(|e| HarnessError::invalid(format!("record {line}, epoch: {e}")))?;
        let mut metrics = [None; 13];
        for (j, slot) in metrics.iter_mut().enumerate() {
            *slot = parse_opt(cell(4 + j), METRIC_NAMES[j], line)?;
        }
        out.push(MetricRecord {
            epoch,
            lr: parse_req(cell(1), "lr", line)?,
            train_loss: parse_req(cell(2), "train_loss", line)?,
            train_acc: parse_req(cell(3), "train_acc", line)?,
            metrics: MetricSuite::from_values(metrics),
            sigma_min_w: parse_opt(cell(17), "sigma_min_w", line)?,
            sigma_avg_w: parse_opt(cell(18), "sigma_avg_w", line)?,
            sigma_min_m: parse_opt(cell(19), "sigma_min_m", line)?,
            sigma_avg_m: parse_opt(cell(20), "sigma_avg_m", line)?,
        });
    }
    Ok(out)
}

pub fn emit_csv(records: &[MetricRecord], path: &Path) -> Result<()> {
    write_file(path, &records_to_csv(records))
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub status: &'a RunStatus,
    pub final_metrics: Option<&'a MetricRecord>,
    pub records: usize,
    pub steps: u64,
    pub decay_events: u32,
    pub wall_time_secs: f64,
}

impl<'a> RunSummary<'a> {
    pub fn of(run: &'a TrainOutcome) -> Self {
        Self {
            config: &run.config,
            status: &run.status,
            final_metrics: run.final_record(),
            records: run.records.len(),
            steps: run.steps,
            decay_events: run.decay_events,
            wall_time_secs: run.wall_time_secs,
        }
    }
}

pub fn summary_json(run: &TrainOutcome) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RunSummary::of(run))?)
}

pub fn emit_summary_json(run: &TrainOutcome, path: &Path) -> Result<()> {
    write_file(path, &(summary_json(run)? + "\n"))
}
