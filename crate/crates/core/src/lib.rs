//! Secrecy analysis for fluid antenna systems under spatially correlated
//! Rayleigh fading.
//!
//! The pipeline runs from a port geometry to a Jakes covariance, fits a
//! variable block-correlation approximation to its spectrum, derives the
//! distribution of the strongest port's amplitude, and evaluates average
//! secrecy capacity and secrecy outage probability by quadrature. A Monte
//! Carlo simulator of the exact correlated channel serves as reference, and
//! two optimizers search over port count and transmit power.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod numeric;
pub mod optimize;
pub mod secrecy;
pub mod specfun;
pub mod stats;
pub mod vbcm;

pub use error::{Error, Result};
