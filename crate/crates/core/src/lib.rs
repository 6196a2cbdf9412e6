//! Smooth projection density estimation.
//!
//! A nonparametric pilot density is evaluated at the data and projected, in
//! least squares, onto spherical Gaussian mixtures with a fixed shared scale.
//! The crate also ships the pilots themselves, a fixed-scale EM baseline,
//! error metrics, the simulation generators and a density-based Bayes
//! classifier.

pub mod baselines;
pub mod bench;
pub mod classifier;
pub mod datagen;
pub mod density;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod mixture;
pub mod pilots;
pub mod projection;
pub mod sample;
pub mod seed;

pub use density::{Density, SquaredNorm};
pub use error::{Error, Result};
pub use grid::EvalGrid;
pub use mixture::GaussianMixture;
pub use pilots::{PilotDensity, PilotKind};
pub use sample::Sample;
