//! Experiment configuration, orchestration and file output.

pub mod config;
pub mod figure1;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::{parse_config, ExperimentConfig, Mode, ModelSpec};
pub use figure1::{reproduce_figure1, Figure1Bundle, Figure1Options, StartKind};
pub use run::{equilibria_report, run_experiment, verify_model, RunOutcome, VerifyReport};
pub use sweep::{run_sweep, SweepReport, SweepRow};
