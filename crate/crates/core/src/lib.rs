//! Spectral fractional calculus on shifted Chebyshev nodes.

pub mod error;
pub mod hermite;
pub mod chebyshev;
pub mod operators;
pub mod oracles;
pub mod pde;
pub mod precision;
pub mod tensor;

pub use error::{Error, Result};
