//! Gradient-flow laboratory for wide fully connected networks.
//!
//! The crate trains L-layer networks by explicit gradient flow, assembles the
//! per-layer empirical Gram matrices in raw and normalized form, evaluates the
//! recursive limiting kernels by Gauss–Hermite quadrature, and measures how far
//! parameters move from initialization as the width grows.

pub mod activation;
pub mod error;
pub mod gradflow;
pub mod gram;
pub mod io;
pub mod kernel;
pub mod lab;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod verify;

pub use activation::Activation;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use network::{Dataset, NormalizedParams, Params, ScalingConfig};
