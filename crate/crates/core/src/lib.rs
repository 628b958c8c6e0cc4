//! Core of a vehicle-telemetry anomaly detector.
//!
//! Sensor streams are cleaned, min-max scaled and cut into fixed-length
//! windows; a temporal convolutional network forecasts the last row of each
//! window from the rows before it; prediction errors are scored by their
//! Mahalanobis distance from the training-error distribution.
//!
//! The crate is `no_std` with `alloc`. File formats, the CLI and threading
//! live in the companion `tcnad` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;

pub mod datagen;
pub mod detector;
#[cfg(feature = "serde")]
pub mod float_repr;
pub mod frame;
pub mod linalg;
pub mod metrics;
pub mod scaler;
pub mod scenarios;
pub mod schema;
pub mod tcn;
pub mod window;

pub use error::{CoreError, CoreResult};
pub use frame::{clean, ChannelFrame, CleanStats};
pub use scaler::{apply_scaler, fit_scaler, invert_scaler, ChannelRange, ScalerParams};
pub use schema::{ChannelDescriptor, ChannelKind, ChannelSchema, Fwg, TIME_CHANNEL};
pub use window::{
    make_windows, split_windows, to_supervised, Label, SplitMode, SplitSet, Supervised,
    WindowConfig, WindowSet, WindowStats,
};
