//! Scenario files, simulation driver and output writers for `thermovi-core`.

pub mod config;
pub mod driver;
pub mod expr;
pub mod output;

pub use config::{load_scenario, parse_scenario, ConfigError, Scenario, Simulation};
pub use driver::{convergence_study, run, stability_study, DriverError};
