//! Scenario files, suite runners and data emission for `nlgreen`.

pub mod config;
pub mod emit;
pub mod error;
pub mod run;

pub use config::ScenarioConfig;
pub use error::{CliError, Result};
pub use run::{run, Command, RunResult};
