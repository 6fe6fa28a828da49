pub mod bilinear;
pub mod boundary;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod laplace;
pub mod linop;
pub mod profiles;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
