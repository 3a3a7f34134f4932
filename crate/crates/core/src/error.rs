use serde::Serialize;
use thiserror::Error;

/// A single violated model assumption, reported by [`crate::model::LsvModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),

    #[error(
        "quadrature did not reach tolerance: estimate {estimate:e}, error bound {error_bound:e}"
    )]
    QuadAccuracy { estimate: f64, error_bound: f64 },

    #[error("root not bracketed on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("degenerate local volatility: {0}")]
    DegenerateEta(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("price {price:e} outside the no-arbitrage band [{lower:e}, {upper:e})")]
    Arbitrage { price: f64, lower: f64, upper: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "optimizer did not converge: {reason} (value {value:e}, constraint residual {residual:e})"
    )]
    NotConverged {
        reason: String,
        value: f64,
        residual: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable tag, used by the CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidModel(_) => "invalid_model",
            Error::QuadAccuracy { .. } => "quad_accuracy",
            Error::Bracket { .. } => "bracket",
            Error::Infeasible(_) => "infeasible",
            Error::DegenerateEta(_) => "degenerate_eta",
            Error::Degenerate(_) => "degenerate",
            Error::Arbitrage { .. } => "arbitrage",
            Error::Unsupported(_) => "unsupported",
            Error::NotConverged { .. } => "not_converged",
        }
    }
}
