//! Simulation harness: environments, measurements, filter runs and Monte Carlo aggregation.

pub mod config;
pub mod csv;
pub mod env;
pub mod equivalence;
pub mod measure;
pub mod metrics;
pub mod montecarlo;
pub mod run;

pub use env::{generate_environment, EnvironmentSpec, World};
pub use measure::{simulate_measurements, Measurements, SensorNoise};
pub use metrics::{nees, rmse_series};
pub use run::{run_filter, InitMode, RunFailure, RunOutput, StepRecord};
