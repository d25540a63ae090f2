//! Transition kernel of log price killed at the barrier.
//!
//! Between monitoring of the barrier nothing is random but the Black-Scholes
//! log price X with drift mu = c - q - sigma^2/2, absorbed the first time it
//! touches b = log H. The method of images gives its (discounted) transition
//! density on (-inf, b):
//!
//! ```text
//! p(s, x, y) = e^{-cs} (1 - e^{-2(b-x)(b-y)/(sigma^2 s)})
//!              * exp(-(y - x - mu s)^2 / (2 sigma^2 s)) / sqrt(2 pi sigma^2 s)
//! ```
//!
//! Integrating a function g against p is the building block of the
//! correction integral. The integrand produced by g is smooth except at the
//! payoff kink, so the integral is done by Gauss-Legendre panels that split
//! at caller-supplied breakpoints, over a window of `space_width` standard
//! deviations capped at the barrier.

use crate::error::{EngineError, Result};
use crate::math::norm_cdf;
use crate::quad::{GaussLegendre, QuadConfig};

/// Parameters of the killed diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Volatility of the log price.
    pub sigma: f64,
    /// Discount rate c.
    pub rate: f64,
    /// Dividend yield q.
    pub div: f64,
    /// Absorbing level b = log H.
    pub log_barrier: f64,
}

impl KernelParams {
    pub fn new(sigma: f64, rate: f64, div: f64, log_barrier: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(EngineError::domain(format!("sigma must be positive, got {sigma}")));
        }
        for (name, v) in [("rate", rate), ("div", div), ("log_barrier", log_barrier)] {
            if !v.is_finite() {
                return Err(EngineError::domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(KernelParams { sigma, rate, div, log_barrier })
    }

    /// Drift of the log price, c - q - sigma^2 / 2.
    pub fn drift(&self) -> f64 {
        self.rate - self.div - 0.5 * self.sigma * self.sigma
    }
}

/// Discounted killed transition density p(s, x, y). Zero at and above the
/// barrier in either argument; errors on s <= 0 or a start point already
/// beyond the barrier.
pub fn killed_density(s: f64, x: f64, y: f64, p: &KernelParams) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(EngineError::domain(format!("time must be positive, got {s}")));
    }
    if x > p.log_barrier {
        return Err(EngineError::domain(format!(
            "start {x} lies beyond the absorbing level {}",
            p.log_barrier
        )));
    }
    Ok(density_unchecked(s, x, y, p))
}

fn density_unchecked(s: f64, x: f64, y: f64, p: &KernelParams) -> f64 {
    let b = p.log_barrier;
    if y >= b || x >= b {
        return 0.0;
    }
    let var = p.sigma * p.sigma * s;
    let reflection = 1.0 - (-2.0 * (b - x) * (b - y) / var).exp();
    let z = y - x - p.drift() * s;
    let gauss = (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    (-p.rate * s).exp() * reflection * gauss
}

/// Total discounted mass of the killed kernel, i.e. the reflection-principle
/// survival probability times e^{-cs}:
///
/// ```text
/// e^{-cs} [ N((b - x - mu s)/(sigma sqrt s))
///           - e^{2 mu (b - x)/sigma^2} N((x - b - mu s)/(sigma sqrt s)) ]
/// ```
pub fn survival_mass(s: f64, x: f64, p: &KernelParams) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(EngineError::domain(format!("time must be positive, got {s}")));
    }
    if x > p.log_barrier {
        return Err(EngineError::domain(format!(
            "start {x} lies beyond the absorbing level {}",
            p.log_barrier
        )));
    }
    let b = p.log_barrier;
    let mu = p.drift();
    let sd = p.sigma * s.sqrt();
    let direct = norm_cdf((b - x - mu * s) / sd);
    let image = (2.0 * mu * (b - x) / (p.sigma * p.sigma)).exp() * norm_cdf((x - b - mu * s) / sd);
    Ok((-p.rate * s).exp() * (direct - image))
}

/// Integral of g against the killed kernel started from x.
pub fn apply_semigroup(
    s: f64,
    x: f64,
    p: &KernelParams,
    quad: &QuadConfig,
    g: impl FnMut(f64) -> f64,
) -> Result<f64> {
    apply_semigroup_split(s, x, p, quad, &[], g)
}

/// Same as [`apply_semigroup`] but with the integration window split at the
/// given breakpoints so integrand kinks (the payoff at log K) always land on
/// panel edges. Breakpoints outside the window are ignored.
pub fn apply_semigroup_split(
    s: f64,
    x: f64,
    p: &KernelParams,
    quad: &QuadConfig,
    breaks: &[f64],
    mut g: impl FnMut(f64) -> f64,
) -> Result<f64> {
    quad.validate()?;
    if !(s.is_finite() && s > 0.0) {
        return Err(EngineError::domain(format!("time must be positive, got {s}")));
    }
    if x > p.log_barrier {
        return Err(EngineError::domain(format!(
            "start {x} lies beyond the absorbing level {}",
            p.log_barrier
        )));
    }
    if s < quad.s_floor {
        // The kernel collapses to a discounted point mass faster than any
        // quadrature can resolve it.
        return Ok((-p.rate * s).exp() * g(x));
    }
    let b = p.log_barrier;
    if x == b {
        return Ok(0.0);
    }
    let sd = p.sigma * s.sqrt();
    let center = x + p.drift() * s;
    let lo = center.min(b) - quad.space_width * sd;
    let hi = b.min(center + quad.space_width * sd);
    if hi <= lo {
        return Ok(0.0);
    }

    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(lo);
    for &bp in breaks {
        if bp > lo && bp < hi {
            edges.push(bp);
        }
    }
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).expect("edges are finite"));
    edges.dedup();

    let total_width = hi - lo;
    let mut acc = 0.0;
    for pair in edges.windows(2) {
        let (a, c) = (pair[0], pair[1]);
        let n = ((quad.n_space as f64) * (c - a) / total_width).round() as usize;
        let rule = GaussLegendre::new(n.max(16));
        acc += rule.integrate(a, c, |y| density_unchecked(s, x, y, p) * g(y));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs_barrier::{uoc_price, BsInputs};

    fn params() -> KernelParams {
        KernelParams::new(0.2, 0.0, 0.0, 120.0_f64.ln()).unwrap()
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = params();
        assert!(KernelParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(killed_density(0.0, 4.6, 4.6, &p).is_err());
        assert!(killed_density(-0.5, 4.6, 4.6, &p).is_err());
        assert!(killed_density(1.0, p.log_barrier + 0.1, 4.6, &p).is_err());
        assert!(survival_mass(0.0, 4.6, &p).is_err());
    }

    #[test]
    fn vanishes_at_the_barrier() {
        let p = params();
        let b = p.log_barrier;
        assert_eq!(killed_density(0.5, b, b - 0.1, &p).unwrap(), 0.0);
        assert_eq!(killed_density(0.5, b - 0.1, b, &p).unwrap(), 0.0);
        assert_eq!(killed_density(0.5, b - 0.1, b + 0.3, &p).unwrap(), 0.0);
        let inside = killed_density(0.5, b - 0.1, b - 0.05, &p).unwrap();
        assert!(inside > 0.0);
    }

    #[test]
    fn symmetric_when_driftless() {
        // mu = 0 at c - q = sigma^2 / 2; the killed Gaussian kernel is then
        // symmetric in its space arguments. Build the rate from the same
        // product so the cancellation is exact in floating point.
        let p = KernelParams::new(0.2, 0.5 * 0.2 * 0.2, 0.0, 120.0_f64.ln()).unwrap();
        assert_eq!(p.drift(), 0.0);
        let (x, y) = (100.0_f64.ln(), 110.0_f64.ln());
        for s in [0.05, 0.4, 1.3] {
            let a = killed_density(s, x, y, &p).unwrap();
            let b = killed_density(s, y, x, &p).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.abs().max(b.abs()), "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn mass_matches_reflection_formula() {
        let quad = QuadConfig::default();
        for (c, q) in [(0.0, 0.0), (0.05, 0.02)] {
            let p = KernelParams::new(0.2, c, q, 120.0_f64.ln()).unwrap();
            for s in [0.01, 0.1, 0.5, 1.0] {
                for spot in [95.0_f64, 100.0, 115.0] {
                    let x = spot.ln();
                    let mass = apply_semigroup(s, x, &p, &quad, |_| 1.0).unwrap();
                    let exact = survival_mass(s, x, &p).unwrap();
                    assert!(
                        (mass - exact).abs() < 1e-10,
                        "c={c} s={s} spot={spot}: {mass} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn semigroup_reproduces_closed_form_price() {
        // Propagate the time-(T - s) price back through the kernel and
        // compare with the time-T price; the kernel carries the discounting.
        let quad = QuadConfig::default();
        let p = params();
        let x = 100.0_f64.ln();
        let t = 1.0;
        for s in [0.1, 0.5, 0.9] {
            let inner = move |y: f64| {
                let inp = BsInputs::new(y, 0.2, 0.0, 0.0, t - s, 100.0, 120.0).unwrap();
                uoc_price(&inp)
            };
            let propagated =
                apply_semigroup_split(s, x, &p, &quad, &[100.0_f64.ln()], inner).unwrap();
            let direct = uoc_price(&BsInputs::new(x, 0.2, 0.0, 0.0, t, 100.0, 120.0).unwrap());
            let rel = (propagated - direct).abs() / direct;
            assert!(rel < 1e-9, "s={s}: {propagated} vs {direct} rel {rel}");
        }
    }

    #[test]
    fn chapman_kolmogorov_composition() {
        let quad = QuadConfig::default();
        let p = KernelParams::new(0.25, 0.03, 0.01, 120.0_f64.ln()).unwrap();
        let x = 100.0_f64.ln();
        let y = 105.0_f64.ln();
        let (s, t) = (0.3, 0.5);
        let composed =
            apply_semigroup(s, x, &p, &quad, |z| density_unchecked(t, z, y, &p)).unwrap();
        let direct = killed_density(s + t, x, y, &p).unwrap();
        let rel = (composed - direct).abs() / direct;
        assert!(rel < 1e-9, "{composed} vs {direct} rel {rel}");
    }

    #[test]
    fn short_times_collapse_to_point_mass() {
        let quad = QuadConfig::default();
        let p = KernelParams::new(0.2, 0.05, 0.0, 120.0_f64.ln()).unwrap();
        let x = 100.0_f64.ln();
        let s = 1e-10;
        let got = apply_semigroup(s, x, &p, &quad, |y| y * y).unwrap();
        assert!((got - (-0.05 * s).exp() * x * x).abs() < 1e-12);
    }
}
