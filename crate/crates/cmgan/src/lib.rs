//! Cross-modal common-representation learning with adversarial training.
//!
//! The crate trains a pair of cross-modal autoencoder generators — one per
//! modality, with a weight-shared second encoder layer — against intra- and
//! inter-modality discriminators, then evaluates the learned common space on
//! bi-modal and all-modal retrieval tasks ranked by cosine similarity.
//!
//! Entry points:
//! - [`data`]: feature datasets, binary/CSV formats, stratified splits, and a
//!   seeded synthetic generator.
//! - [`model`]: the generator/discriminator network family and checkpoints.
//! - [`train`]: the alternating optimization loop.
//! - [`eval`] / [`report`]: retrieval metrics and report rendering.
//! - [`nn`]: the dense-layer numerical core with a finite-difference
//!   gradient checker.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod report;
pub mod train;

pub use error::{Error, Result};
