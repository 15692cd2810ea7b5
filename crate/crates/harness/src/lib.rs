//! Experiment driver for the `nc-core` laboratory: single training runs with
//! per-epoch neural-collapse logging, parallel hyperparameter sweeps,
//! regressions across runs, and simulation-versus-oracle theorem checks.

pub mod config;
pub mod error;
pub mod output;
pub mod regress;
pub mod sweep;
pub mod theorem;
pub mod trainer;

pub use config::{ExperimentConfig, SweepSpec};
pub use error::{HarnessError, Result};
pub use output::{emit_csv, emit_summary_json, records_from_csv, records_to_csv, CSV_HEADER};
pub use regress::{regress_csv, regress_runs};
pub use sweep::{run_sweep, SweepOutcome};
pub use theorem::{check_theorem, TheoremCheck, TheoremParams};
pub use trainer::{run_training, MetricRecord, RunStatus, TrainOutcome, Trainer};
