//! Standard normal density and distribution function.
//!
//! The distribution function is evaluated through the complementary error
//! function, N(z) = erfc(-z / sqrt(2)) / 2, which keeps full relative accuracy
//! deep in the lower tail. Barrier formulas subtract near-equal distribution
//! values, so tail accuracy matters more here than in plain vanilla pricing.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density n(z).
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function N(z).
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}
