//! Koopman neural operator toolkit.
//!
//! The crate is split along the data path:
//!
//! - [`spectral`]: radix-2 real FFTs, mode truncation, a direct DFT oracle and
//!   Gaussian random field sampling on the periodic unit torus.
//! - [`pdegen`]: pseudo-spectral solvers for 1-D Burgers and 2-D Navier–Stokes
//!   (vorticity form) plus dataset assembly.
//! - [`model`]: the encoder / Koopman / complement / decoder network with a
//!   hand-written reverse pass.
//! - [`training`]: losses, Adam, the training loop, metrics and gradient checks.
//! - [`persistence`]: tensor files, checkpoints, dataset directories, metric logs.
//! - [`harness`]: experiment drivers and the command-line front end.

pub mod error;
pub mod harness;
pub mod model;
pub mod pdegen;
pub mod persistence;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
