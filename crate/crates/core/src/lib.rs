//! Core algorithms for measuring, predicting and reducing the run-to-run
//! instability of word embeddings. `no_std` with `alloc`.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod align;
pub mod change;
pub mod corpus;
pub mod error;
pub mod gaussian;
pub mod instability;
pub mod linalg;
pub mod overlap;
pub mod pip;
pub mod rng;
pub mod runs;
pub mod sgns;
pub mod space;
pub mod special;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use space::{
    analogy_score, joint_vocabulary, AnalogyDataset, AnalogyScore, EmbeddingSpace, Vocabulary,
};
