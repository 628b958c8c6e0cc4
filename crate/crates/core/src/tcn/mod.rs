//! Temporal convolutional forecaster.
//!
//! A stack of residual blocks of dilated causal convolutions followed by a
//! linear head that maps the last time step's features to a prediction of
//! the next observation on every channel.

mod adam;
mod conv;
mod model;
mod train;

pub use adam::Adam;
pub use conv::{dilated_causal_conv, ConvLayer};
pub use model::{
    receptive_field, receptive_field_of, Activation, Dense, EpochRecord, ResidualBlock, TcnConfig,
    TcnModel, TcnParams, CONVS_PER_BLOCK,
};
pub use train::{predict, train, train_with, EarlyStopping, TrainSummary};
