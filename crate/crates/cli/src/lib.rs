//! Command-line front end for `fredholm-core`: JSON problem configs in,
//! solution and convergence tables out, plus the bundled example registry.

pub mod config;
pub mod error;
pub mod registry;
pub mod report;
pub mod runner;

pub use config::{Overrides, ProblemSpec};
pub use error::CliError;
pub use report::{Format, ReportBundle};
pub use runner::{run_example, run_problem, run_spec, RunOptions};
