//! Scenario parsing and command orchestration for the `diffnet` binary.

pub mod commands;
mod error;
pub mod scenario;

pub use error::{CliError, Result};
pub use scenario::{default_grid, parse_grid, parse_scenario, MomentsChoice, Resolved, Scenario};
