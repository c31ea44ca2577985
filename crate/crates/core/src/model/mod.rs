//! The masked, dilated causal convolutional generator: architecture
//! planning, parameter layout, forward passes and checkpoints.

mod arch;
mod checkpoint;
mod net;

pub use arch::{param_count, plan_architecture, ArchitectureSpec, ChannelLadder, LayerShape, Plan};
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::WeatherNet;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::likelihood::LikelihoodError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("horizon {horizon} does not fit a receptive field of {receptive_field} days")]
    HorizonTooLong { horizon: usize, receptive_field: usize },
    #[error("conditioning length {achieved} outside allowed range {min}..={max}")]
    T0OutOfRange { achieved: usize, min: usize, max: usize },
    #[error("window has {found} days, model expects {expected}")]
    WindowLength { expected: usize, found: usize },
    #[error("{found} target days given, model predicts {expected}")]
    TargetLength { expected: usize, found: usize },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checkpoint truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checkpoint checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
