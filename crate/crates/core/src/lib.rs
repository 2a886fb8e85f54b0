//! Age of Information for status-update links whose transmitter and receiver
//! clocks drift apart.
//!
//! Three engines compute the same quantities independently:
//!
//! * [`analytic`]: closed-form stationary distributions and averages;
//! * [`dtmc`]: the truncated joint `(drift, age)` Markov chain, generated
//!   from the age recursions and solved numerically;
//! * [`sim`]: a seeded slot-level Monte Carlo simulator.
//!
//! [`experiments`] runs them side by side over parameter grids.

// Tolerance checks are written `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod dtmc;
pub mod error;
pub mod experiments;
pub mod model;
pub mod pmf;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Channel, DriftModel, FixedDrift, PositiveDrift, TernaryDrift};
pub use pmf::AoiPmf;
pub use rng::RngStream;
