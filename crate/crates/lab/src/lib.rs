//! Scenario runner for the leibenson laboratory.

pub mod checks;
pub mod error;
pub mod plot;
pub mod run;
pub mod scenario;
pub mod shipped;
pub mod sweep;

pub use error::{RunError, RunResult};
pub use run::{run_scenario, RunOptions, RunOutcome, Status};
pub use scenario::Scenario;
