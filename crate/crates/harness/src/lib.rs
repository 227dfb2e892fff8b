//! Experiment harness: configs, seeded runners and result files for the
//! re-uploading circuit studies.

pub mod config;
pub mod error;
pub mod experiments;
pub mod nottingham;
pub mod records;
pub mod seed;

pub use config::{ArchitectureRange, ExperimentConfig, ExperimentKind, IntRange};
pub use error::{HarnessError, HarnessResult};
pub use experiments::{run_experiment, RunOptions};
pub use records::{ExperimentOutput, OutputFormat, RunRecord, Table, RESULTS_HEADER};
