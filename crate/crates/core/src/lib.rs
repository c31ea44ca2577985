//! Lightweight autoregressive convolutional weather generators.
//!
//! Daily series of solar radiation, minimum/maximum temperature and rainfall
//! are modelled in a transformed space (`maxt` replaced by `diff = maxt -
//! mint`) with one dilated causal convolution trunk shared by four masked
//! input streams. Each stream emits the two parameters of one variable's
//! distribution, and sampling proceeds variable by variable within a day.
//!
//! Besides the network this crate carries the historical-resampling
//! baseline, the evaluation procedures, and the file formats used by the
//! `wxgen` command line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod baseline;
pub mod config;
pub mod data;
pub mod evaluate;
pub mod likelihood;
pub mod met;
pub mod model;
pub mod sampler;
pub mod trainer;

mod variable;

pub use variable::Variable;
