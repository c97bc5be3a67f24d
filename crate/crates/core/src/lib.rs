//! Adversarially robust unsupervised graph representation learning.
//!
//! The encoder is a one-layer GNN trained to maximize a noise-contrastive
//! mutual-information estimate. Training alternates between the benign
//! estimate and the worst-case estimate under a budgeted topology/attribute
//! attack, switching on whether the representation vulnerability (the drop of
//! the estimate under attack) exceeds a soft margin.

// `!(x > 0.0)` is used on purpose so NaN fails validation, and indexed loops
// over several matrices at once read closer to the math than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod error;
pub mod graph;
pub mod kernels;
pub mod encoder;
pub mod objective;
pub mod rng;
pub mod attack;
pub mod trainer;
pub mod downstream;
pub mod io;
pub mod toy;
pub mod pipeline;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{Graph, NormalizedPropagator, RelaxedAdjacency};
pub use encoder::{EncoderParams, Representation};
pub use objective::{Gradients, NegativeSample, Tape};
