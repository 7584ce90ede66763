//! Spectral positional encodings for graphs: Laplacian spectra, learnable
//! Chebyshev-filtered encodings, spectral distances, SBM community recovery
//! and a small node-classification harness.

pub mod chebyshev;
pub mod community;
pub mod distances;
pub mod encodings;
pub mod error;
pub mod graph;
pub mod harness;
pub mod learner;
pub mod spectral;

pub use error::{Error, Result};
