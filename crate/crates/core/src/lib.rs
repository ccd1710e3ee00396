//! Intonation-intensity toolkit: final-syllable prosody features, a
//! relative-attribute ranker that scores questioning intensity, k-means
//! statement/question labeling, the differentiable auxiliary losses of a
//! multi-style TTS front end, and objective speech metrics (MCD, FFE,
//! duration MSE).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod features;
pub mod framing;
pub mod fsutil;
pub mod metrics;
pub mod ranker;
pub mod stylemath;

pub use error::{Error, Result};
