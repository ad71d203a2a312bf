//! Run configuration parsing and subcommand dispatch.

pub mod config;
pub mod dispatch;

pub use config::{
    apply_override, build_equilibrium, build_sim_config, emit_config, parse_config, RunConfig,
};
pub use dispatch::{content_hash, diagnose_series, dispatch, Cli, Command, CommonArgs};
