//! Pricing engine for up-and-out barrier calls under a mean-reverting
//! stochastic volatility model, after Kato, Takahashi and Yamada (2013).
//!
//! The volatility enters as a regular perturbation of size eps around the
//! constant level sigma. The zeroth order of the expansion is the classical
//! Black-Scholes barrier formula; the first order adds a semi-closed
//! correction, a time integral of the killed heat kernel applied to a
//! combination of barrier vega and vanna. A path-level Monte Carlo engine
//! with an optional Brownian-bridge crossing correction serves as the
//! benchmark.
//!
//! Module map:
//! - [`bs_barrier`]: flat-vol barrier prices and the greeks the correction
//!   integrand needs.
//! - [`kernel`]: the killed log-price transition density and its quadrature.
//! - [`expansion`]: model parameters and the zeroth/first order prices.
//! - [`montecarlo`]: the benchmark simulator.
//! - [`cli`]: the `barrier-ae` command-line front end.

pub mod bs_barrier;
pub mod cli;
pub mod error;
pub mod expansion;
pub mod kernel;
pub mod math;
pub mod montecarlo;
pub mod quad;

pub use bs_barrier::BsInputs;
pub use error::{EngineError, Result};
pub use expansion::{
    price_ae, BarrierOption, ExpansionOrder, ModelParams, PriceResult, PricingMethod,
};
pub use kernel::KernelParams;
pub use montecarlo::{simulate, McConfig, McEstimate, Scheme};
pub use quad::{EndpointMap, QuadConfig};
