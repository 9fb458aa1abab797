//! Experiment configuration, execution and persistence.
//!
//! A run reads a TOML [`ExperimentConfig`], executes it with a fixed
//! stream assignment (worker count only changes scheduling) and writes
//! `curve.csv`, `summary.json` and `run.log` atomically.

pub mod config;
pub mod io;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, OUTPUT_DIR_ENV};
pub use io::{atomic_write, curve_csv, read_curve_csv, read_matrix_csv, CurveRow};
pub use run::{execute, exit_code_for_error, run, Check, RunOutcome, RunStatus, Summary, Verdict};
