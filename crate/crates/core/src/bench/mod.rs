//! Scenario generation, configuration, marker data, reports and the
//! benchmark runner.

pub mod config;
pub mod markers;
pub mod report;
pub mod runner;
pub mod scenario;

pub use config::BenchConfig;
pub use report::{Report, ReportFormat, ReportRow};
pub use runner::{run_scenario, RunOptions};
pub use scenario::{ModelSpec, Scenario};
