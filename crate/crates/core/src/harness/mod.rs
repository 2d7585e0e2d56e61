//! Offline scenario execution, metrics and noise studies.

pub mod builder;
pub mod metrics;
pub mod monte_carlo;
pub mod pipeline;
pub mod scenario;

pub use metrics::{complexity, gaze_error, success_rate, Complexity, Metrics, TemplateRow, TEMPLATES};
pub use monte_carlo::{monte_carlo, monte_carlo_sequential, run_batch, MonteCarloReport, NoiseSweep};
pub use pipeline::{run_scenario, RunConfig, RunResult, SlotOutcome, Stage};
pub use scenario::{Scenario, ScenarioError};
