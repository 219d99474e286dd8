//! Special functions used by the channel approximation and coverage analysis.
//!
//! Everything here is pure `f64` code with no allocation on the hot paths, so
//! the functions are safe to call concurrently from any number of threads.

mod bell;
mod bessel;
mod gamma;
mod lambert;

pub use bell::{bell_complete, polygamma_at_one, riemann_zeta};
pub use bessel::bessel_j0;
pub use gamma::{
    gamma, ln_gamma, lower_incomplete_gamma_reg, upper_incomplete_gamma,
    upper_incomplete_gamma_reg,
};
pub use lambert::lambert_w0;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Truncation control for slowly converging series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(abs_tol: f64, max_terms: usize) -> Self {
        assert!(abs_tol > 0.0, "series tolerance must be positive");
        assert!(max_terms >= 1, "series needs at least one term");
        Self { abs_tol, max_terms }
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            max_terms: 500,
        }
    }
}
