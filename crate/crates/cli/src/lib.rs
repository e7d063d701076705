//! Scenario runner for the `osc_core` checks.

pub mod error;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenario;
pub mod shipped;

pub use error::{CliError, Result};
pub use report::{RunReport, Status, TaskReport, Value};
pub use scenario::{Overrides, Scenario};
