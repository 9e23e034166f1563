//! Onboard Earth-observation processing engine: encodes 32x32x4
//! multispectral tiles into 128-d VAE latents behind a pluggable
//! backend seam, detects changes between sequential acquisitions in
//! latent space, trains a tiny (129-parameter) binary classifier on
//! latents, and benchmarks every stage with per-batch timing.
//!
//! See the `examples/` directory for one runnable example per
//! capability, and the `latentsat` binary for the operator CLI.

pub mod bench;
pub mod change;
pub mod encoder;
pub mod error;
pub mod fewshot;
pub mod fixtures;
pub mod ingest;
pub mod model_io;
pub mod rng;
pub mod tensor;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
