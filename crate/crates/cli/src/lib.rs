//! Declarative experiment runner for the msfi random field laboratory.
//!
//! An experiment is a TOML file describing a field model, a local
//! functional, a sweep and a replicate budget. [`run_experiment`] executes
//! it deterministically and returns a [`Report`] whose rows, fitted bound
//! verdicts and provenance are written as `results.csv`, `verdicts.csv` and
//! `report.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod scaling;

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use error::CliError;
pub use report::{Report, ResultRow, Verdict};
pub use runner::run_experiment;
pub use scaling::{fit_loglog, fit_scaling, ScalingFit};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MSFI_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`]; unset or invalid
/// values leave the default (available parallelism). Results never depend
/// on the thread count.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
