//! Forward models and parameter estimation for coherent extinction
//! spectroscopy of a single two-level emitter.
//!
//! Frequencies are cyclic MHz in the FWHM convention throughout; see [`units`].

mod bloch;
mod csvio;
pub mod correlation;
pub mod error;
pub mod estimation;
pub mod measurement;
pub mod physics;
pub mod polarization;
pub mod spectra;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
