//! Numerical laboratory for spectral overcrowding of random matrices.
//!
//! The crate samples iid, Wigner and perturbed ensembles, computes their
//! ordered spectra, runs Monte Carlo estimates of hard-edge and bulk
//! overcrowding events with exact binomial intervals, and ships the
//! constructive linear algebra (distances to column spans, minor
//! selection, restricted invertibility, length-squared sampling) used to
//! audit those events trial by trial.

pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub(crate) mod par;
pub mod quadrature;
pub mod rng;
pub mod spectra;

/// Dense real matrix. Indexing is `(row, column)`.
pub type RealMatrix = nalgebra::DMatrix<f64>;

pub use ensembles::{levy_concentration, EnsembleSpec, EntryDistribution, Family, Perturbation, Symmetry};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use spectra::{IntervalSpec, IntervalStyle, Spectrum, SpectrumOrdering};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
