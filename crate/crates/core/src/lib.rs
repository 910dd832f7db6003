//! Audio deepfake detection with a patch-based spectrogram transformer, plus a
//! few-shot continual-learning plugin built on gradient-boosted trees over the
//! transformer's clip embeddings.

// `!(x > 0.0)` is how validators reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod augment;
pub mod continual;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod frontend;
pub mod gbdt;
pub mod metrics;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
