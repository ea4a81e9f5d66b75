//! Graph spectral domain adversarial attacks on point clouds.
//!
//! The crate is `no_std` (with `alloc`). It covers the full numeric
//! pipeline: synthetic shapes and normalization ([`cloud`], [`synth`]), K-NN
//! graph transforms ([`spectral`]), a differentiable mini-PointNet victim
//! ([`model`]), distortion metrics ([`metrics`]), the spectral attack and a
//! coordinate-space baseline ([`attack`]), and input-sanitizing defenses
//! ([`defense`]). File formats and the command line live in the `gsda`
//! companion crate.
//!
//! Enable the `std` feature to get `std::error::Error` impls and runtime
//! CPU feature detection in the matrix kernels.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod attack;
pub mod cloud;
pub mod defense;
mod eigen;
mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod spectral;
pub mod synth;

pub use crate::cloud::{normalize_unit_ball, sample_points, PointCloud};
pub use crate::eigen::symmetric_eigen;
pub use crate::error::{Error, Result};
pub use crate::spectral::{SpectralBasis, SpectralCoeffs};

/// One point, `[x, y, z]`.
pub type Point = [f64; 3];
