//! Multisampling for 2D CNNs.
//!
//! A stride-`k` subsampling layer normally keeps one element of every
//! `k x k` window. Multisampling keeps `n` of them and stores each in its own
//! *submap*, so feature maps gain a submap axis:
//! `(batch, channels, submaps, height, width)`. Checkered subsampling is the
//! `k = 2, n = 2` case (top-left + bottom-right), which keeps half of the
//! input at each step instead of a quarter.
//!
//! * [`sampler`]: window selectors and the n-rooks predicate.
//! * [`trace`]: geometry-only tracing of where submap samples land.
//! * [`nn`]: tensors, reverse-mode autodiff, submap-aware layers, layer
//!   graphs and the traditional → checkered converter.
//! * [`analysis`]: resolution and complexity calculators.
//! * [`verify`], [`train`], [`data`], [`image`]: invariant suites, the toy
//!   training comparison, its synthetic dataset and PGM/PPM output.

pub mod analysis;
pub mod autograd;
pub mod data;
mod error;
pub mod image;
pub mod nn;
mod par;
pub mod sampler;
pub mod tensor;
pub mod trace;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use par::is_parallel;
pub use tensor::Tensor;
