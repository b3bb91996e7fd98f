//! Compact convolutional autoencoders for acoustic anomaly detection.
//!
//! The crate is organised as a pipeline:
//!
//! - [`audio_io`]: WAV decoding, MIMII-style dataset indexing and a seeded
//!   synthetic machine-sound generator.
//! - [`features`]: log-Mel spectrograms (1024-point FFT, hop 512, 128 bands)
//!   cropped into non-overlapping 32 x 128 windows.
//! - [`nn`]: a small tensor/layer library with hand-written backward passes
//!   and Adam.
//! - [`arch`]: declarative autoencoder descriptions, parameter/FLOP
//!   accounting and the `.olnt` model format.
//! - [`anomaly`]: normal-only training, reconstruction-error scoring and AUC.
//! - [`explore`]: constrained architecture search driven by a NetScore-style
//!   performance function.
//! - [`bench`]: single-inference latency microbenchmark.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod arch;
pub mod audio_io;
pub mod bench;
pub mod explore;
pub mod features;
pub mod nn;
pub mod seed;
