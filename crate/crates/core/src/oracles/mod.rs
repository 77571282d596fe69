//! Independent numerical ground truth for the closed forms. Nothing here
//! reuses the analytic formulas; only transforms of the input laws and the
//! quadrature-based arrival counts are shared.

mod fd;
mod ode;
mod pgf;
pub mod quadrature;
mod truncated;

pub use fd::{fd_derivative, fd_derivative_backward};
pub use ode::{dopri5, ode_arrival_count};
pub use pgf::{default_radius, pgf_to_pmf};
pub use truncated::{
    certify_truncation, embedded_stationary_truncated, TruncatedSolution, TruncationConfig,
};
