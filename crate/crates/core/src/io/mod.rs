//! Scenario files and run reports.

pub mod report;
pub mod scenario;

pub use report::{Num, RunReport, REPORT_SCHEMA};
pub use scenario::{emit_scenario, parse_scenario, parse_scenario_str, ScenarioBundle, SolverConfig};
