//! Voxel-wise fiber orientation distribution (FOD) estimation from
//! diffusion-weighted MRI by spherical deconvolution.
//!
//! Three estimators share one interface ([`estimators::FodEstimator`]) and are
//! selected by name through [`estimators::EstimatorRegistry`]:
//!
//! * `bjs`: blockwise James–Stein shrinkage of the least-squares deconvolution,
//!   followed by a one-step super-resolution sharpening.
//! * `shridge`: Laplace–Beltrami penalized least squares with a BIC grid search.
//! * `scsd`: `shridge` refined by iterative super-resolution constrained deconvolution.

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod model;
pub mod peaks;
pub mod sphere;

pub use error::{FodError, Result};
