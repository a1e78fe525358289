//! Minimal nonnegative solutions of `A1 X^2 + A0 X + A-1 = X` with semi-infinite
//! quasi-Toeplitz coefficients.

pub mod conditioning;
pub mod error;
pub mod fixedpoint;
pub mod laurent;
pub mod models;
pub mod newton;
pub mod oracle;
pub mod qtmat;
mod spectral;
pub mod symbolsolve;

pub use error::{Error, Result};
pub use laurent::LaurentSeries;
pub use models::{DriftReport, QbdModel};
pub use qtmat::{Correction, QtMatrix};
