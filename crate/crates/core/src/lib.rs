//! Exact-summation neural quantum states for the transverse-field Ising ring
//! under sitewise basis rotations.
//!
//! Every expectation value, gradient and metric is a full sum over the `2^N`
//! basis configurations, so nothing here is stochastic.

pub mod error;
pub mod hilbert;
pub mod model;
pub mod ansatz;
pub mod geometry;
pub mod train;
pub mod diagnostics;

pub use error::{Error, Result};
pub use hilbert::{SpinBasis, StateVector, C64};
