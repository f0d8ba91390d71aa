//! Experiment harness: configuration files, seeded sweeps, result tables
//! and plot data for the `irsbeam` solver.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod records;

pub use config::{irs_shape, ConfigFile, ExperimentKind, ExperimentSpec, Overrides, OUTPUT_DIR_ENV};
pub use error::CliError;
pub use experiment::{run_experiment, run_trials, trial_seed, ExperimentOutput};
pub use plot::emit_plot_data;
pub use records::{parse_csv, to_csv, ResultRecord, RESULTS_HEADER};
