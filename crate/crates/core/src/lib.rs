//! Surface electrons on liquid helium in a tilted magnetic field.
//!
//! The crate solves the one-dimensional image-potential problem, couples the
//! resulting Rydberg ladder to Landau levels through the in-plane field, and
//! derives spectra, absorption maps and relaxation rates from the result.

mod error;

pub mod cli;
pub mod config;

pub mod coupled;
pub mod dissipation;
pub mod jcm;
pub mod spectroscopy;
pub mod tridiag;
pub mod units;
pub mod vertical;

pub use error::{Error, Result};
