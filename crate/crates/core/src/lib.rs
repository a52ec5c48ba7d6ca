//! Thermal-image turbulence simulation, measurement and restoration.
//!
//! The crate covers the forward model (turbulence fields, radiometry, phase
//! screens and image degradation), the objective and metric functions, a
//! classical measure → restore → re-measure cycle, and a small pure-Rust
//! reference for the transformer blocks of the learned models.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod coop;
pub mod fields;
pub mod io;
pub mod nnref;
pub mod optics;
pub mod radiometry;
pub mod rng;
pub mod scene;
pub mod sequence;
pub mod spectral;

mod error;
mod serde_float;
mod util;

pub use error::{Error, Result};
pub use sequence::FrameSequence;
