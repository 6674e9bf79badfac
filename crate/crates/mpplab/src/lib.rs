//! Experiment orchestration for the mpp-core toolkit: configuration parsing,
//! seeded replication, report assembly and serialization.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{
    CounterexampleConfig, Experiment, ExperimentConfig, MartingaleConfig, MergeConfig,
    OrthogonalityConfig, ReportFormat, RepresentationConfig, SimulateConfig, ValueSolver,
};
pub use error::{HarnessError, Result};
pub use experiments::{atom_support_scan, resolve_output, run, run_toml_file, OUT_DIR_ENV};
pub use report::{Check, EstimateRecord, ExperimentReport, ResidualQuantiles};
