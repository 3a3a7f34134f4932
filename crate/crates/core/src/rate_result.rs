use serde::Serialize;

use crate::paths::PathPair;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RateDiagnostics {
    pub converged: bool,
    pub evaluations: usize,
    /// The one-dimensional search ended on its interval boundary.
    pub boundary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub el_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Value of the rate function at one strike, with the optimizer's byproducts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub value: f64,
    pub method: String,
    /// Time-average of the variance path, when the method optimizes over it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_star: Option<f64>,
    /// Terminal price of the optimal price path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_price: Option<f64>,
    /// Multiplier of the average-variance constraint `int e^h eta^2(e^g) dt = K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrange: Option<f64>,
    pub g_cost: f64,
    pub h_cost: f64,
    pub diagnostics: RateDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathPair>,
}

impl RateResult {
    pub fn simple(method: &str, value: f64) -> Self {
        RateResult {
            value,
            method: method.to_string(),
            z_star: None,
            endpoint_price: None,
            lagrange: None,
            g_cost: 0.0,
            h_cost: value,
            diagnostics: RateDiagnostics {
                converged: true,
                ..Default::default()
            },
            paths: None,
        }
    }
}
