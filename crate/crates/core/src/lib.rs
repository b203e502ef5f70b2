//! Joint biometric and sensor recognition from a single image.
//!
//! One compact embedding, learned by a small convolutional network under
//! classical, siamese or triplet training, serves simultaneously as a subject
//! template and a device template. The crate provides:
//!
//! - [`kernels`]: dense tensors, layer forward/backward passes, Adam, and the
//!   step-decay schedule the training loop runs on;
//! - [`embedder`]: the fixed embedding network and its classifier head, with
//!   a binary save/load format;
//! - [`losses`]: contrastive, triplet and N-pair objectives plus offline and
//!   online tuple miners;
//! - [`data`]: manifests, joint (subject, sensor) labels, 70:30 splits, image
//!   loading, and a seeded synthetic dataset generator;
//! - [`prnu`]: the sensor-fingerprint identification baseline;
//! - [`eval`]: joint identification (CMC) and joint verification (ROC,
//!   TMR@FMR) protocols and the embedding-dimension sweep;
//! - [`train`]: the mode-exclusive training loop behind the CLI.

pub mod data;
pub mod embedder;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod losses;
pub mod prnu;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
