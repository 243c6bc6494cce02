//! Stochastic zeropoint-field model of parametric down- and up-conversion.
//!
//! The vacuum is a Gaussian random field (`zpf`). A pumped crystal acts on
//! mode amplitudes as a linear Bogoliubov map (`coupling`) whose geometry comes
//! from phase matching (`dispersion`). Detectors threshold at the zeropoint
//! intensity (`detection`), and `rainbow` sweeps frequency to build the main
//! down-conversion rainbow and its up-conversion satellite.
//!
//! Every pipeline runs either on exact Gaussian covariances or on Monte Carlo
//! ensembles; the two are cross-checked throughout the tests.

pub mod coupling;
pub mod detection;
pub mod dispersion;
pub mod error;
pub mod rainbow;
pub mod zpf;

pub use error::{Error, Result};
