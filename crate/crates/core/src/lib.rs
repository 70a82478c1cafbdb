//! Lexicon learning from pre-segmented, unlabeled speech representations.
//!
//! Word segments are represented either as frame sequences (continuous or
//! quantized into discrete units) or as averaged unit-norm embeddings, then
//! clustered into hypothesized word types and scored against forced-alignment
//! labels.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod distance;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod io;
pub mod seed;
pub mod synth;
pub mod transform;

pub use error::{LexiconError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
