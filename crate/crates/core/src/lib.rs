//! Short-maturity asymptotics for options on realized variance under
//! local-stochastic volatility.
//!
//! The central object is the rate function `I(K)` governing the decay
//! `P(avg variance >= K) ~ exp(-I(K)/T)` of out-of-the-money variance
//! options as maturity `T -> 0`. It is computed in closed form for zero
//! correlation, bracketed by analytic bounds, solved numerically for general
//! correlation, and expanded around the money. The [`smile`] module turns it
//! into an implied-volatility smile and [`mc`] gives a simulation benchmark.

// `!(x > 0.0)` also rejects NaN, which is the point of those guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atm;
pub mod error;
pub mod mc;
pub mod methods;
pub mod model;
pub mod optim;
pub mod paths;
pub mod quad;
pub mod rate_general;
pub mod rate_result;
pub mod rate_zero;
pub mod smile;

pub use error::{Error, Result};
pub use methods::{RateEstimate, RateMethod, RateRegistry};
pub use model::{DriftSpec, EtaSpec, LsvModel, Moneyness, SigmaSpec};
pub use paths::PathPair;
pub use rate_result::{RateDiagnostics, RateResult};
