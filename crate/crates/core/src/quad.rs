//! Quadrature machinery for the correction integral.
//!
//! The outer time integral runs over (0, T) and its integrand behaves like
//! sqrt(T - s) near maturity and like a delta sequence near s = 0, so plain
//! Gauss-Legendre converges poorly. Two endpoint-clustering substitutions are
//! provided:
//!
//! * double-exponential: s = (T/2)(1 + tanh((pi/2) sinh u)) with u on an
//!   equally spaced grid over [-U, U], the classical tanh-sinh rule,
//! * sin^2: s = T sin^2(pi u / 2) with Gauss-Legendre nodes in u over [0, 1],
//!   which turns square-root endpoint behaviour into an analytic integrand.
//!
//! The inner space integral is handled by panel Gauss-Legendre in
//! [`crate::kernel::apply_semigroup_split`], splitting at supplied breakpoints
//! so the payoff kink at log K never sits inside a panel.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{EngineError, Result};

/// Truncation of the double-exponential grid in the u variable. Beyond this
/// the weights fall below anything representable against the integrand.
const DE_CUTOFF: f64 = 3.7;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Fetch (or build and cache) the n-point rule. Rules are shared process
    /// wide since node computation is the expensive part.
    pub fn new(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(Self::compute(n))).clone()
    }

    fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess followed by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = -p / dp;
                x += dx;
                if dx.abs() <= 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // cos is decreasing in i, so x walks from +1 toward 0; store
            // ascending.
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b].
    pub fn scaled(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integrate f over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.scaled(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for j in 2..=n {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = p_next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Substitution used for the outer time integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointMap {
    /// tanh-sinh on an equally spaced u grid.
    DoubleExponential,
    /// s = T sin^2(pi u / 2) with Gauss-Legendre in u.
    SinSquared,
}

impl std::fmt::Display for EndpointMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EndpointMap::DoubleExponential => write!(f, "double-exponential"),
            EndpointMap::SinSquared => write!(f, "sin2"),
        }
    }
}

impl std::str::FromStr for EndpointMap {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double-exponential" | "tanh-sinh" => Ok(EndpointMap::DoubleExponential),
            "sin2" | "sin-squared" => Ok(EndpointMap::SinSquared),
            other => Err(EngineError::config(format!(
                "unknown endpoint map '{other}' (expected 'double-exponential' or 'sin2')"
            ))),
        }
    }
}

/// Resolution knobs for the correction quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    /// Node count of the outer time rule.
    pub n_time: usize,
    /// Base node count of the inner space rule, scaled per panel by width.
    pub n_space: usize,
    /// Half-width of the spatial window in units of sigma * sqrt(s).
    pub space_width: f64,
    /// Below this time the kernel is treated as a point mass at x.
    pub s_floor: f64,
    /// Endpoint substitution for the time integral.
    pub endpoint_map: EndpointMap,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            n_time: 64,
            n_space: 200,
            space_width: 10.0,
            s_floor: 1e-8,
            endpoint_map: EndpointMap::DoubleExponential,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_time < 2 {
            return Err(EngineError::config("n_time must be at least 2"));
        }
        if self.n_space < 2 {
            return Err(EngineError::config("n_space must be at least 2"));
        }
        if !(self.space_width.is_finite() && self.space_width > 0.0) {
            return Err(EngineError::config("space_width must be positive and finite"));
        }
        if !(self.s_floor.is_finite() && self.s_floor >= 0.0) {
            return Err(EngineError::config("s_floor must be non-negative and finite"));
        }
        Ok(())
    }

    /// The same configuration at twice the resolution in both directions,
    /// used for convergence checks by Richardson-style doubling.
    pub fn doubled(&self) -> Self {
        QuadConfig {
            n_time: 2 * self.n_time,
            n_space: 2 * self.n_space,
            ..self.clone()
        }
    }
}

/// Nodes (s_i, w_i) for integrating over the time interval (0, t). Nodes that
/// round onto the endpoints are dropped; their weights are far below double
/// precision relative to the interval.
pub fn time_nodes(t: f64, n: usize, map: EndpointMap) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    match map {
        EndpointMap::DoubleExponential => {
            let h = 2.0 * DE_CUTOFF / (n - 1) as f64;
            for i in 0..n {
                let u = -DE_CUTOFF + h * i as f64;
                let inner = FRAC_PI_2 * u.sinh();
                let s = 0.5 * t * (1.0 + inner.tanh());
                let cosh_inner = inner.cosh();
                let w = h * 0.5 * t * FRAC_PI_2 * u.cosh() / (cosh_inner * cosh_inner);
                if s > 0.0 && s < t && w.is_finite() && w > 0.0 {
                    out.push((s, w));
                }
            }
        }
        EndpointMap::SinSquared => {
            let rule = GaussLegendre::new(n);
            for (u, w_u) in rule.scaled(0.0, 1.0) {
                let half_angle = FRAC_PI_2 * u;
                let s = t * half_angle.sin().powi(2);
                let w = w_u * t * FRAC_PI_2 * (PI * u).sin();
                if s > 0.0 && s < t && w.is_finite() && w > 0.0 {
                    out.push((s, w));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        // An n-point rule integrates degree 2n - 1 exactly.
        let rule = GaussLegendre::new(16);
        let exact = 2.0 / 32.0; // integral of x^31 over [-1,1] is 0; use x^30
        let got = rule.integrate(-1.0, 1.0, |x| x.powi(30));
        assert!((got - 2.0 / 31.0).abs() < 1e-14, "x^30: {got}");
        let got_odd = rule.integrate(-1.0, 1.0, |x| x.powi(31));
        assert!(got_odd.abs() < 1e-15);
        let _ = exact;
    }

    #[test]
    fn gauss_legendre_exponential() {
        let rule = GaussLegendre::new(24);
        let got = rule.integrate(0.0, 1.0, f64::exp);
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_interval() {
        for n in [1, 2, 5, 64, 200] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.scaled(-1.0, 1.0).map(|(_, w)| w).sum();
            assert!((total - 2.0).abs() < 1e-13, "n = {n}: {total}");
        }
    }

    #[test]
    fn rule_cache_returns_shared_instances() {
        let a = GaussLegendre::new(48);
        let b = GaussLegendre::new(48);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.len(), 48);
    }

    #[test]
    fn time_nodes_integrate_constant() {
        for map in [EndpointMap::DoubleExponential, EndpointMap::SinSquared] {
            let nodes = time_nodes(2.5, 64, map);
            let total: f64 = nodes.iter().map(|&(_, w)| w).sum();
            assert!((total - 2.5).abs() < 1e-10, "{map}: {total}");
            for &(s, _) in &nodes {
                assert!(s > 0.0 && s < 2.5);
            }
        }
    }

    #[test]
    fn time_nodes_resolve_square_root_endpoint() {
        // integral of sqrt(t - s) over (0, t) = (2/3) t^{3/2}, singular
        // derivative at s = t.
        let t: f64 = 1.0;
        let exact = 2.0 / 3.0 * t.powf(1.5);
        for map in [EndpointMap::DoubleExponential, EndpointMap::SinSquared] {
            let got: f64 = time_nodes(t, 64, map)
                .iter()
                .map(|&(s, w)| w * (t - s).sqrt())
                .sum();
            assert!((got - exact).abs() < 1e-10, "{map}: {got} vs {exact}");
        }
    }

    #[test]
    fn quad_config_validation() {
        assert!(QuadConfig::default().validate().is_ok());
        let bad = QuadConfig { n_time: 1, ..QuadConfig::default() };
        assert!(bad.validate().is_err());
        let bad = QuadConfig { space_width: 0.0, ..QuadConfig::default() };
        assert!(bad.validate().is_err());
        let doubled = QuadConfig::default().doubled();
        assert_eq!(doubled.n_time, 128);
        assert_eq!(doubled.n_space, 400);
    }
}
