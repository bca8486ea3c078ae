//! Scenario generation, the per-step loop, Monte-Carlo experiments and CSV output.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod scenario;
pub mod world;

pub use config::{Mode, ScenarioConfig};
pub use experiment::{run_experiment, run_single, run_sweep, Aggregate, Experiment, Sweep};
pub use metrics::{RunSummary, StepRecord};
pub use scenario::generate_scenario;
pub use world::World;
