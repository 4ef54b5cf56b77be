//! Command-line experiments on top of `perc-core`: configuration, output
//! files with a config-echo header, and one driver per subcommand.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Cli, Command, CommandKind, ExperimentConfig};
pub use error::{LabError, LabResult};
pub use experiments::{run, RunReport};
