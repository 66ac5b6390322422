//! Experiment harness: trials, sweeps, diagnostics and CSV output.

pub mod agent;
pub mod config;
pub mod io;
pub mod presets;
pub mod sweep;
pub mod trial;

pub use config::{AgentSpec, EnvSpec, ExperimentConfig, Family, ModelSpec, SweepGrid};
pub use trial::{run_experiment, EpisodeRecord};
