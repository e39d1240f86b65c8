//! Constellation-constrained rate-splitting multiple access: rates,
//! precoder optimization, large-scale grouping and an experiment harness.

pub mod allocation;
pub mod baselines;
pub mod channel;
pub mod constellation;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod largescale;
pub mod layout;
pub mod optimizer;
pub mod problem;
pub mod rate;

pub use error::{Error, Result};
