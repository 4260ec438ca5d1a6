//! Isospectral drums with inhomogeneous densities and potentials.
//!
//! The crate builds the classic pair of seven-triangle isospectral domains
//! (`GWW_A`, `GWW_B`), discretizes density-weighted and Schrödinger operators on them,
//! computes their low spectra and checks isospectrality through the
//! transplantation map.

pub mod geometry;
pub mod field;
pub mod grid;
pub mod operator;
pub mod eigen;
pub mod transplant;
pub mod extrapolate;
pub mod config;
pub mod cli;
