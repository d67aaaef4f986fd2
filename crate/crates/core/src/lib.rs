//! Capacity of the binomial channel: closed-form bounds, a numerical
//! capacity oracle, the orthogonal-polynomial chi-square machinery around the
//! Beta-binomial reference output, and support-size lower bounds for
//! capacity-achieving inputs.

pub mod capacity_bounds;
pub mod cli;
pub mod channel;
pub mod error;
pub mod numerics;
pub mod orthopoly;
pub mod solver;
pub mod support_bounds;
pub mod verify;

pub use error::{Error, Result};
