//! Numerical toolkit for symmetric Levy processes on the upper half-space:
//! exponents and jump kernels, scale functions, free transition densities
//! with explicit bound envelopes, killed-path Monte Carlo, and the
//! assembled two-sided bound checks.

pub mod bessel;
pub mod density;
pub mod error;
pub mod exponent;
pub mod halfspace;
pub mod model;
pub mod quad;
pub mod scaling;
pub mod special;
pub mod verify;

pub use error::{LevyError, Result};
pub use model::{LevyModel, ValidationReport};
pub use scaling::ScaleFunction;
