//! Neural keyphrase extraction over word n-grams.
//!
//! Candidates are all n-grams of length `1..=K` in a document. Each occurrence
//! is composed from its token embeddings by a width-`k` convolution, scored by
//! a linear head, and the scores of every occurrence of the same phrase string
//! are max-pooled into one document-level score. Training minimizes a pairwise
//! hinge loss over those pooled scores plus a per-occurrence chunking
//! cross-entropy.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`corpus`]: loading, tokenization, n-gram enumeration and labeling
//! - [`encoder`]: token embedding providers (trainable lookup table or
//!   precomputed per-document vectors)
//! - [`model`]: parameters, forward pass, losses, gradients, checkpoints
//! - [`train`]: Adam with warmup/decay, the training loop, gradient checking
//! - [`infer`]: top-N extraction and prediction files
//! - [`eval`]: P/R/F1@N, Porter stemming, bucketed analyses
//! - [`baselines`]: TF-IDF and TextRank
//! - [`synth`]: the planted-keyphrase corpus generator
//! - [`cli`]: the `jkpe` command line
//!
//! See `examples/` for one runnable program per capability.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod infer;
pub mod manifest;
pub mod matrix;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
