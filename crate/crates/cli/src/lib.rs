//! Configuration, file formats and subcommands behind the `sdr` binary.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{
    cmd_fit, cmd_msd, cmd_predict, cmd_simulate, cmd_spectrum, predict_cpmg, with_workers, Curve, FitReport,
};
pub use config::RunConfig;
