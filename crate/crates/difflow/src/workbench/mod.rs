//! Experiment workbench: configuration, diagnostics, optimization driver and
//! file output behind the command-line interface.

pub mod bfgs;
pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod output;

pub use bfgs::{bfgs_optimize, BfgsOptions, BfgsOutcome};
pub use config::{ConfiguredBody, SimConfigFile};
pub use diagnostics::{drag_lift_coefficients, strouhal_number, ForceHistory, ForceRow};
pub use experiment::{run_experiment, ExperimentMode, ExperimentReport, Overrides};
