//! Stationary analysis, simulation and admission control for the M/G/1
//! retrial queue with a constant retrial policy and event-dependent
//! Poisson arrivals.

pub mod analytic;
pub mod cli;
pub mod dists;
pub mod error;
pub mod oracles;
pub mod optimizer;
pub mod simulator;

pub use analytic::{ArrivalClass, ModelSpec, RateProfile, StationaryReport};
pub use dists::DistributionSpec;
pub use error::{Error, Result};
