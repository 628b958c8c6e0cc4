//! File formats, pipeline orchestration and the `tcnad` command line for the
//! TCN-based vehicle telemetry anomaly detector in [`tcnad_core`].

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use config::{RunConfig, ScalerScope, ThresholdSource};
pub use error::{Error, Result, Stage};
pub use tcnad_core as core;
