//! Configuration loading, pipelines and report emission behind `halanay-certify`.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{load_config, ConfigError, RunConfig};
pub use plot::emit_plot_script;
pub use report::{to_json, Report, Status};
pub use run::{run, Command, Outcome, OutputPaths};
