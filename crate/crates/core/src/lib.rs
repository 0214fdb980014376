//! Norm-based capacity bounds for feedforward networks: matrix norms and
//! projections, bound formulas, rank-1 compression certificates, Rademacher
//! complexity estimators and lower-bound constructions.

pub mod bounds;
pub mod compress;
pub mod error;
pub mod exec;
pub mod lowerbound;
pub mod matlin;
pub mod network;
pub mod rademacher;

pub use error::{Error, Result};
