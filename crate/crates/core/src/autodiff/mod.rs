//! Minimal reverse-mode differentiation over channelled 1-D sequences.
//!
//! The forward operations ([`dilated_conv`], [`masked_day_conv`],
//! [`pointwise_conv`], [`activation`]) are plain functions; a [`Tape`]
//! records them against a [`ParameterStore`] so that [`Tape::backward`] can
//! return parameter gradients in the store's flattening order. All arithmetic
//! is `f64`.

mod adam;
mod grid;
mod kernel;
pub mod ops;
mod tape;

pub use adam::{adam_step, AdamState};
pub use grid::SequenceGrid;
pub use kernel::{ConvKernel, Gradients, KernelId, ParameterStore};
pub use ops::{activation, dilated_conv, masked_day_conv, pointwise_conv, Activation, DayMask};
pub use tape::{NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("dimension mismatch on {axis}: expected {expected}, found {found}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("insufficient length: need at least {required}, found {found}")]
    InsufficientLength { required: usize, found: usize },
    #[error("non-finite value at channel {channel}, position {position}")]
    NonFiniteValue { channel: usize, position: usize },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("mask must have 4 entries, found {0}")]
    MaskLength(usize),
    #[error("duplicate parameter name {0:?}")]
    DuplicateName(String),
    #[error("parameter vectors misaligned: expected {expected}, found {found}")]
    Misaligned { expected: usize, found: usize },
    #[error("invalid optimizer settings: {0}")]
    InvalidOptimizer(String),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
    #[error("cannot sum an empty list of nodes")]
    EmptySum,
    #[error("backward called before any forward computation was recorded")]
    BackwardBeforeForward,
    #[error("backward already ran on this tape; record a new forward pass")]
    BackwardAlreadyRun,
    #[error("loss must be a scalar, found {0} elements")]
    NotScalar(usize),
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error(transparent)]
    Likelihood(#[from] crate::likelihood::LikelihoodError),
}
