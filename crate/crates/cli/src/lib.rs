//! Experiment harness around the polymer simulation engine: configuration,
//! runners, CSV/JSON reporting and the identity-check suite.

pub mod config;
pub mod experiments;
pub mod report;
pub mod suite;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{CheckOutcome, CheckReport, RunArtifacts};
