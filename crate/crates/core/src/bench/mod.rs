//! Experiment configuration, runs across seeds, curve aggregation, policy
//! grids and the command-line front end.

pub mod aggregate;
pub mod cli;
pub mod config;
pub mod curve;
pub mod experiment;
pub mod policy_grid;

pub use aggregate::{aggregate, AggregateCurve, AggregatePoint, Metric};
pub use config::{Algorithm, ExperimentConfig};
pub use experiment::{run_experiment, run_repro, run_seed, SeedRun};
pub use policy_grid::{export_policy_grid, GridPoint};
