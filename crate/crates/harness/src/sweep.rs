//! Grid sweeps over optimizer kind, learning rate, momentum and weight decay.
//!
//! Runs execute in parallel and share nothing. A failing run is recorded in
//! its row and never stops the sweep.

use std::collections::BTreeSet;
use std::path::Path;

use nc_core::optim::{OptimizerConfig, OptimizerKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, SeedMode, SweepSpec};
use crate::error::{write_file, Result};
use crate::output::{opt_field, records_to_csv, CSV_HEADER};
use crate::regress::record_value;
use crate::trainer::{run_training, MetricRecord, RunStatus};

/// Metrics that get a momentum × weight-decay pivot table.
pub const PIVOT_METRICS: [&str; 4] = ["nc0", "nc0_alpha", "nc2", "nc3"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub config: ExperimentConfig,
}

/// Mixes the base seed with a run index (splitmix64 finalizer).
fn derive_seed(base: u64, index: usize) -> u64 {
    let mut z = base ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Expands the grid in kind, lr, momentum, weight-decay order.
pub fn grid(spec: &SweepSpec) -> Vec<SweepPoint> {
    let base = &spec.base;
    let mut out = Vec::with_capacity(spec.num_runs());
    for &kind in &spec.optimizers {
        for &lr in &spec.learning_rates {
            for &momentum in &spec.momenta {
                for &wd in &spec.weight_decays {
                    let index = out.len();
                    let mut config = base.clone();
                    let mut o = OptimizerConfig::new(kind, lr, wd).with_momentum(momentum);
                    o.schedule = base.optimizer.schedule.clone();
                    if kind.is_adam() && base.optimizer.kind.is_adam() {
                        o.beta2 = base.optimizer.beta2;
                        o.epsilon = base.optimizer.epsilon;
                    }
                    config.optimizer = o;
                    config.output = None;
                    if spec.seed_mode == SeedMode::Derived {
                        config.seed = derive_seed(base.seed, index);
                    }
                    out.push(SweepPoint {
                        index,
                        kind,
                        lr,
                        momentum,
                        weight_decay: wd,
                        config,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// `None` when the run could not start (invalid config and the like).
    pub status: Option<RunStatus>,
    pub error: Option<String>,
    pub records: Vec<MetricRecord>,
    /// Passed the accuracy filter and finished normally.
    pub kept: bool,
}

impl SweepRow {
    pub fn final_record(&self) -> Option<&MetricRecord> {
        self.records.last()
    }

    pub fn final_value(&self, name: &str) -> Option<f64> {
        self.final_record().and_then(|r| record_value(r, name))
    }

    fn status_label(&self) -> &'static str {
        self.status.as_ref().map_or("error", RunStatus::label)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub accuracy_threshold: f64,
    pub rows: Vec<SweepRow>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let rows = grid(spec)
        .into_par_iter()
        .map(|point| match run_training(&point.config) {
            Ok(run) => {
                log::info!("sweep run {} finished: {}", point.index, run.status.label());
                let kept = run.status == RunStatus::Completed
                    && run
                        .final_record()
                        .is_some_and(|r| r.train_acc >= spec.accuracy_threshold);
                SweepRow {
                    point,
                    status: Some(run.status),
                    error: None,
                    records: run.records,
                    kept,
                }
            }
            Err(e) => {
                log::warn!("sweep run {} failed: {e}", point.index);
                SweepRow {
                    point,
                    status: None,
                    error: Some(e.to_string()),
                    records: Vec::new(),
                    kept: false,
                }
            }
        })
        .collect();
    Ok(SweepOutcome {
        accuracy_threshold: spec.accuracy_threshold,
        rows,
    })
}

impl SweepOutcome {
    pub fn kept(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.kept)
    }

    /// One line per run: its coordinates, status and final record.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = vec![
            "run",
            "optimizer",
            "lr",
            "momentum",
            "weight_decay",
            "seed",
            "status",
            "kept",
            "error",
        ];
        header.extend(CSV_HEADER);
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let p = &row.point;
            let mut fields = vec![
                p.index.to_string(),
                p.kind.to_string(),
                p.lr.to_string(),
                p.momentum.to_string(),
                p.weight_decay.to_string(),
                p.config.seed.to_string(),
                row.status_label().to_string(),
                row.kept.to_string(),
                row.error.clone().unwrap_or_default(),
            ];
            match row.final_record() {
                Some(r) => fields.extend(CSV_HEADER.iter().map(|c| opt_field(record_value(r, c)))),
                None => fields.extend(CSV_HEADER.iter().map(|_| String::new())),
            }
            w.write_record(&fields).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    /// Momentum × weight-decay table of a final metric over kept runs with
    /// the given optimizer and learning rate. Cells without a kept run are empty.
    pub fn pivot_csv(&self, kind: OptimizerKind, lr: f64, metric: &str) -> String {
        let rows: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.point.kind == kind && r.point.lr == lr)
            .collect();
        let momenta = sorted_unique(rows.iter().map(|r| r.point.momentum));
        let decays = sorted_unique(rows.iter().map(|r| r.point.weight_decay));
        let mut out = String::from("momentum");
        for wd in &decays {
            out.push_str(&format!(",{wd}"));
        }
        out.push('\n');
        for m in &momenta {
            out.push_str(&m.to_string());
            for wd in &decays {
                let cell = rows
                    .iter()
                    .find(|r| r.kept && r.point.momentum == *m && r.point.weight_decay == *wd)
                    .and_then(|r| r.final_value(metric));
                out.push(',');
                out.push_str(&opt_field(cell));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `summary.csv`, one log per run under `runs/`, and pivot tables.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("summary.csv"), &self.summary_csv())?;
        for row in &self.rows {
            let name = format!("run_{:03}.csv", row.point.index);
            write_file(&dir.join("runs").join(name), &records_to_csv(&row.records))?;
        }
        let combos: BTreeSet<(String, u64)> = self
            .rows
            .iter()
            .map(|r| (r.point.kind.to_string(), r.point.lr.to_bits()))
            .collect();
        for (kind, lr_bits) in combos {
            let lr = f64::from_bits(lr_bits);
            let parsed: OptimizerKind = kind.parse()?;
            for metric in PIVOT_METRICS {
                let name = format!("pivot_{kind}_lr{lr}_{metric}.csv");
                write_file(&dir.join(name), &self.pivot_csv(parsed, lr, metric))?;
            }
        }
        Ok(())
    }
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        let base = ExperimentConfig {
            epochs: 30,
            metric_period: 10,
            ..ExperimentConfig::default()
        };
        let mut spec = SweepSpec::single(base);
        spec.momenta = vec![0.0, 0.9];
        spec.weight_decays = vec![0.0, 0.05];
        spec.accuracy_threshold = 0.0;
        spec
    }

    #[test]
    fn grid_order_and_seeds() {
        let mut spec = tiny_spec();
        let g = grid(&spec);
        assert_eq!(g.len(), 4);
        assert_eq!((g[1].momentum, g[1].weight_decay), (0.0, 0.05));
        assert!(g.iter().all(|p| p.config.seed == spec.base.seed));
        spec.seed_mode = SeedMode::Derived;
        let seeds: BTreeSet<u64> = grid(&spec).iter().map(|p| p.config.seed).collect();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn single_point_matches_run_training() {
        let spec = SweepSpec::single(tiny_spec().base);
        let out = run_sweep(&spec).unwrap();
        let direct = run_training(&spec.base).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(records_to_csv(&out.rows[0].records), records_to_csv(&direct.records));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut spec = tiny_spec();
        spec.learning_rates = vec![0.05, -1.0];
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.rows.len(), 8);
        let failed: Vec<_> = out.rows.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(failed.len(), 4);
        assert!(failed.iter().all(|r| !r.kept && r.status.is_none()));
        assert!(out.summary_csv().contains(",error,"));
    }

    #[test]
    fn pivot_shape() {
        let out = run_sweep(&tiny_spec()).unwrap();
        let p = out.pivot_csv(OptimizerKind::SgdCoupled, 0.05, "nc0_alpha");
        let lines: Vec<&str> = p.lines().collect();
        assert_eq!(lines[0], "momentum,0,0.05");
        assert_eq!(lines.len(), 3);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
    }
}
