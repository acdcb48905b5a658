//! Damped twist waves in chromonic liquid crystals.
//!
//! The crate covers the scalar kernels of the diagonalized wave system,
//! initial profiles, the characteristic-based shock-time estimator, a direct
//! method-of-lines solver with shock detection, characteristic tracing on
//! computed solutions, and the command-line front end.

pub mod characteristics;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod numerics;
pub mod profiles;
pub mod solver;

pub use error::{Error, Result};
