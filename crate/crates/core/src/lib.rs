//! Analytic and numerical models of nonlinear interference in amplified,
//! dispersion-uncompensated fiber links, including the interaction between
//! the signal and accumulated amplifier noise.

pub mod checks;
pub mod coeffs;
pub mod config;
pub mod constellation;
pub mod error;
pub mod kernel;
pub mod link;
pub mod mc;
pub mod mi;
pub mod oracle;
pub mod quad;
pub mod ssfm;
pub mod units;
pub mod variance;

pub use error::{Error, Result};
