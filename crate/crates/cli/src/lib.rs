//! Command implementations behind the `segtrade` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_estimate, cmd_mc, cmd_prop1_sweep, cmd_simulate, cmd_solve, run_mc, run_sweep, RunContext, SweepPoint, SweepSummary,
    VERSION,
};
pub use config::{EstimateConfig, GridAxis, LoadedConfig, McRunConfig, SimulateConfig, SolveConfig, SweepConfig, SweepSpec};
pub use error::{CliError, Result, EXIT_CONVERGENCE, EXIT_ESTIMATION, EXIT_VALIDATION};
