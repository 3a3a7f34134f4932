//! Two-sided bounds on the correlated rate function from the uncorrelated one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::rate_general::correlated::rate_upper_corr_path;
use crate::rate_general::functional::lambda_functional;
use crate::rate_zero::{asian_rate_j, optimal_paths_zero_rho, rate_zero_rho, ZeroRhoOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    /// Rate function at zero correlation.
    pub i0: f64,
    pub lower: f64,
    pub upper_candidates: Vec<(String, f64)>,
    pub best_upper: f64,
}

/// Grid used to evaluate the action on the uncorrelated optimal paths.
pub const BOUND_PATH_GRID: usize = 401;

/// `I0/(1+|rho|) <= I_rho <= min(candidates)`, where the candidates are
/// `I0/(1-|rho|)`, the action on the uncorrelated optimal paths, the
/// variance-only cost `J(V0, K/eta0^2)/(1-rho^2)`, and the cost with the
/// price path slaved to the variance path.
pub fn rate_bounds_rho(model: &LsvModel, k: f64) -> Result<BoundsResult> {
    let rho = model.rho;
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("bounds need |rho| < 1, got {rho}")));
    }
    let uncorrelated = model.with_rho(0.0);
    let i0 = rate_zero_rho(&uncorrelated, k, &ZeroRhoOptions::default())?.value;
    let a = rho.abs();
    let paths = optimal_paths_zero_rho(&uncorrelated, k, BOUND_PATH_GRID)?;
    let on_paths = lambda_functional(model, &paths)?.total;
    let (eta0, _, _) = model.eta_log_coeffs();
    let variance_only =
        asian_rate_j(&model.sigma, model.v0, k / (eta0 * eta0))? / (1.0 - rho * rho);
    let slaved = rate_upper_corr_path(model, k)?;
    let upper_candidates = vec![
        ("zero_corr_scaled".to_string(), i0 / (1.0 - a)),
        ("zero_corr_paths".to_string(), on_paths),
        ("variance_only".to_string(), variance_only),
        ("slaved_price".to_string(), slaved),
    ];
    let best_upper = upper_candidates
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundsResult {
        i0,
        lower: i0 / (1.0 + a),
        upper_candidates,
        best_upper,
    })
}
