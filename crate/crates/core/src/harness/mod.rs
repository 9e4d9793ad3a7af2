//! Configuration, replicated simulation, validation against the oracle, named experiments and file output.

pub mod config;
pub mod experiments;
pub mod io;
pub mod sim;
pub mod validate;

pub use config::{ExperimentConfig, GraphSource, SchedulerConfig, Variant};
pub use experiments::{run_experiment, CATALOG};
pub use sim::{run_simulation, RunResult};
