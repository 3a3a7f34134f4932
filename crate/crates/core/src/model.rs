//! Model inputs for the local-stochastic volatility dynamics
//!
//! ```text
//! dS/S = (r - q) dt + eta(S) sqrt(V) (rho dZ + sqrt(1 - rho^2) dW)
//! dV/V = mu(V) dt + sigma(V) dZ
//! ```
//!
//! The leverage function `eta` is parametrized in log-moneyness `u = ln(S/S0)`
//! and the vol-of-vol `sigma` in `w = ln(V/V0)`. Every spec carries explicit
//! (or, for `Tanh`, implied) positive lower and finite upper bounds, so the
//! boundedness and positivity hypotheses of the asymptotic results are
//! checkable instead of assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Leverage (local volatility) function `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSpec {
    /// `eta(S) = f0 + f1 * tanh(ln(S/S0) - x0)`.
    Tanh {
        f0: f64,
        f1: f64,
        x0: f64,
    },
    /// `eta(S) = sum_k coeffs[k] * ln(S/S0)^k`, clamped to `[clamp_lo, clamp_hi]`.
    LogPoly {
        coeffs: Vec<f64>,
        clamp_lo: f64,
        clamp_hi: f64,
    },
    Constant {
        eta0: f64,
    },
}

/// Volatility-of-volatility function `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Constant {
        sigma0: f64,
    },
    /// `sigma(V) = sigma0 + sigma1 w + sigma2 w^2` with `w = ln(V/V0)`, clamped.
    LogPoly {
        sigma0: f64,
        sigma1: f64,
        sigma2: f64,
        clamp_lo: f64,
        clamp_hi: f64,
    },
}

/// Drift `mu(V)` of the variance process. Only the simulator uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    #[default]
    Zero,
    Constant {
        mu0: f64,
    },
}

fn poly_eval(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn poly_deriv(coeffs: &[f64], u: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
}

fn poly_deriv2(coeffs: &[f64], u: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(2)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * u + (k * (k - 1)) as f64 * c)
}

/// `p(a) - p(b)` without cancellation, given `d = a - b`.
fn poly_diff(coeffs: &[f64], a: f64, b: f64, d: f64) -> f64 {
    let mut total = 0.0;
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        let mut s = 0.0;
        for j in 0..k {
            s += a.powi((k - 1 - j) as i32) * b.powi(j as i32);
        }
        total += c * s;
    }
    total * d
}

impl EtaSpec {
    /// `eta` at log-moneyness `u = ln(S/S0)`.
    pub fn value(&self, u: f64) -> f64 {
        match self {
            EtaSpec::Tanh { f0, f1, x0 } => f0 + f1 * (u - x0).tanh(),
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => poly_eval(coeffs, u).clamp(*clamp_lo, *clamp_hi),
            EtaSpec::Constant { eta0 } => *eta0,
        }
    }

    /// `d eta / du`, i.e. `S eta'(S)`.
    pub fn du(&self, u: f64) -> f64 {
        match self {
            EtaSpec::Tanh { f1, x0, .. } => {
                let c = (u - x0).cosh();
                f1 / (c * c)
            }
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => {
                let p = poly_eval(coeffs, u);
                if p <= *clamp_lo || p >= *clamp_hi {
                    0.0
                } else {
                    poly_deriv(coeffs, u)
                }
            }
            EtaSpec::Constant { .. } => 0.0,
        }
    }

    pub fn duu(&self, u: f64) -> f64 {
        match self {
            EtaSpec::Tanh { f1, x0, .. } => {
                let c = (u - x0).cosh();
                -2.0 * f1 * (u - x0).tanh() / (c * c)
            }
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => {
                let p = poly_eval(coeffs, u);
                if p <= *clamp_lo || p >= *clamp_hi {
                    0.0
                } else {
                    poly_deriv2(coeffs, u)
                }
            }
            EtaSpec::Constant { .. } => 0.0,
        }
    }

    /// `eta(a) - eta(b)`, accurate when `a` and `b` are close.
    pub fn diff(&self, a: f64, b: f64) -> f64 {
        self.diff_step(a, a - b)
    }

    /// `eta(a) - eta(a - d)` with the step `d` given exactly.
    pub fn diff_step(&self, a: f64, d: f64) -> f64 {
        let b = a - d;
        match self {
            EtaSpec::Tanh { f1, x0, .. } => f1 * d.sinh() / ((a - x0).cosh() * (b - x0).cosh()),
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => {
                let (pa, pb) = (poly_eval(coeffs, a), poly_eval(coeffs, b));
                let inside = |p: f64| p > *clamp_lo && p < *clamp_hi;
                if inside(pa) && inside(pb) {
                    poly_diff(coeffs, a, b, d)
                } else {
                    pa.clamp(*clamp_lo, *clamp_hi) - pb.clamp(*clamp_lo, *clamp_hi)
                }
            }
            EtaSpec::Constant { .. } => 0.0,
        }
    }

    /// Infimum and supremum of `eta` over all prices.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            EtaSpec::Tanh { f0, f1, .. } => (f0 - f1.abs(), f0 + f1.abs()),
            EtaSpec::LogPoly {
                clamp_lo, clamp_hi, ..
            } => (*clamp_lo, *clamp_hi),
            EtaSpec::Constant { eta0 } => (*eta0, *eta0),
        }
    }

    /// Coefficients `(eta0, eta1, eta2)` of the expansion in powers of `ln(S/S0)`.
    pub fn log_coeffs(&self) -> (f64, f64, f64) {
        match self {
            EtaSpec::Tanh { f0, f1, x0 } => {
                let c = x0.cosh();
                let eta1 = f1 / (c * c);
                (f0 - f1 * x0.tanh(), eta1, eta1 * x0.tanh())
            }
            EtaSpec::LogPoly { .. } => (self.value(0.0), self.du(0.0), 0.5 * self.duu(0.0)),
            EtaSpec::Constant { eta0 } => (*eta0, 0.0, 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            EtaSpec::Tanh { f0, f1, .. } => f1.abs() < 1e-12 * f0.abs(),
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => {
                let c0 = coeffs.first().copied().unwrap_or(0.0).abs().max(1e-300);
                clamp_lo == clamp_hi || coeffs.iter().skip(1).all(|c| c.abs() < 1e-12 * c0)
            }
            EtaSpec::Constant { .. } => true,
        }
    }
}

impl SigmaSpec {
    /// `sigma` at log-variance deviation `w = ln(V/V0)`.
    pub fn value(&self, w: f64) -> f64 {
        match self {
            SigmaSpec::Constant { sigma0 } => *sigma0,
            SigmaSpec::LogPoly {
                sigma0,
                sigma1,
                sigma2,
                clamp_lo,
                clamp_hi,
            } => (sigma0 + w * (sigma1 + w * sigma2)).clamp(*clamp_lo, *clamp_hi),
        }
    }

    /// `d sigma / dw`, i.e. `V sigma'(V)`.
    pub fn dw(&self, w: f64) -> f64 {
        match self {
            SigmaSpec::Constant { .. } => 0.0,
            SigmaSpec::LogPoly {
                sigma0,
                sigma1,
                sigma2,
                clamp_lo,
                clamp_hi,
            } => {
                let p = sigma0 + w * (sigma1 + w * sigma2);
                if p <= *clamp_lo || p >= *clamp_hi {
                    0.0
                } else {
                    sigma1 + 2.0 * sigma2 * w
                }
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            SigmaSpec::Constant { sigma0 } => (*sigma0, *sigma0),
            SigmaSpec::LogPoly {
                clamp_lo, clamp_hi, ..
            } => (*clamp_lo, *clamp_hi),
        }
    }

    /// Coefficients `(sigma0, sigma1, sigma2)` of the expansion in powers of `ln(V/V0)`.
    pub fn log_coeffs(&self) -> (f64, f64, f64) {
        match self {
            SigmaSpec::Constant { sigma0 } => (*sigma0, 0.0, 0.0),
            SigmaSpec::LogPoly {
                sigma0,
                sigma1,
                sigma2,
                clamp_lo,
                clamp_hi,
            } => {
                if sigma0 <= clamp_lo || sigma0 >= clamp_hi {
                    (self.value(0.0), 0.0, 0.0)
                } else {
                    (*sigma0, *sigma1, *sigma2)
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            SigmaSpec::Constant { .. } => true,
            SigmaSpec::LogPoly {
                sigma1,
                sigma2,
                clamp_lo,
                clamp_hi,
                ..
            } => clamp_lo == clamp_hi || (*sigma1 == 0.0 && *sigma2 == 0.0),
        }
    }
}

impl DriftSpec {
    pub fn value(&self, _v: f64) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::Constant { mu0 } => *mu0,
        }
    }
}

/// Moneyness of a variance strike against the short-maturity forward `eta(S0)^2 V0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moneyness {
    OtmCall,
    OtmPut,
    Atm,
}

/// Relative tolerance under which a strike is treated as at-the-money.
pub const ATM_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsvModel {
    pub s0: f64,
    pub v0: f64,
    pub rho: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub q: f64,
    pub eta: EtaSpec,
    pub sigma: SigmaSpec,
    #[serde(default)]
    pub mu: DriftSpec,
}

/// Outcome of a successful [`LsvModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub forward_limit: f64,
    pub moneyness: Option<Moneyness>,
    pub warnings: Vec<String>,
}

impl LsvModel {
    /// The Tanh model with `f0 = 1, f1 = -0.1, x0 = 0`, `sigma = 2`, `V0 = 0.1`, `S0 = 1`.
    pub fn tanh_reference(rho: f64) -> Self {
        LsvModel {
            s0: 1.0,
            v0: 0.1,
            rho,
            r: 0.0,
            q: 0.0,
            eta: EtaSpec::Tanh {
                f0: 1.0,
                f1: -0.1,
                x0: 0.0,
            },
            sigma: SigmaSpec::Constant { sigma0: 2.0 },
            mu: DriftSpec::Zero,
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        LsvModel {
            rho,
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("model file: {e}")))
    }

    /// `eta(S)`; `S` must be positive.
    pub fn eta_eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("eta needs S > 0, got {s}")));
        }
        Ok(self.eta.value((s / self.s0).ln()))
    }

    pub fn sigma_eval(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("sigma needs V > 0, got {v}")));
        }
        Ok(self.sigma.value((v / self.v0).ln()))
    }

    pub fn eta_log_coeffs(&self) -> (f64, f64, f64) {
        self.eta.log_coeffs()
    }

    pub fn sigma_log_coeffs(&self) -> (f64, f64, f64) {
        self.sigma.log_coeffs()
    }

    /// Short-maturity limit of the variance-swap fair strike, `eta(S0)^2 V0`.
    pub fn forward_variance_limit(&self) -> f64 {
        let e = self.eta.value(0.0);
        e * e * self.v0
    }

    pub fn moneyness(&self, k: f64) -> Moneyness {
        let f = self.forward_variance_limit();
        if (k - f).abs() <= ATM_REL_TOL * f {
            Moneyness::Atm
        } else if k > f {
            Moneyness::OtmCall
        } else {
            Moneyness::OtmPut
        }
    }

    /// Log-moneyness `ln(K / (eta(S0)^2 V0))`.
    pub fn log_moneyness(&self, k: f64) -> f64 {
        (k / self.forward_variance_limit()).ln()
    }

    /// Checks positivity, boundedness and regularity of the coefficient
    /// functions. Every violated condition is reported.
    pub fn validate(&self, strike: Option<f64>) -> Result<ValidationReport> {
        let mut bad = Vec::new();
        let push = |bad: &mut Vec<Violation>, field: &'static str, message: String| {
            bad.push(Violation { field, message })
        };

        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            push(
                &mut bad,
                "s0",
                format!("spot must be positive and finite, got {}", self.s0),
            );
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            push(
                &mut bad,
                "v0",
                format!(
                    "initial variance must be positive and finite, got {}",
                    self.v0
                ),
            );
        }
        if !(self.rho.abs() <= 1.0) {
            push(
                &mut bad,
                "rho",
                format!("correlation must lie in [-1, 1], got {}", self.rho),
            );
        }
        if !self.r.is_finite() {
            push(&mut bad, "r", "rate must be finite".into());
        }
        if !self.q.is_finite() {
            push(&mut bad, "q", "dividend yield must be finite".into());
        }
        if let DriftSpec::Constant { mu0 } = self.mu {
            if !mu0.is_finite() {
                push(&mut bad, "mu", "drift must be finite".into());
            }
        }

        match &self.eta {
            EtaSpec::Tanh { f0, f1, x0 } => {
                if ![f0, f1, x0].iter().all(|v| v.is_finite()) {
                    push(&mut bad, "eta", "tanh parameters must be finite".into());
                } else if !(f1.abs() < *f0) {
                    push(
                        &mut bad,
                        "eta",
                        format!("eta not positive: need |f1| < f0, got f0 = {f0}, f1 = {f1}"),
                    );
                }
            }
            EtaSpec::LogPoly {
                coeffs,
                clamp_lo,
                clamp_hi,
            } => {
                if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
                    push(
                        &mut bad,
                        "eta",
                        "log-polynomial needs finite coefficients".into(),
                    );
                }
                if !(*clamp_lo > 0.0 && clamp_lo <= clamp_hi && clamp_hi.is_finite()) {
                    push(&mut bad, "eta", format!("eta clamp must satisfy 0 < lo <= hi < inf, got [{clamp_lo}, {clamp_hi}]"));
                }
            }
            EtaSpec::Constant { eta0 } => {
                if !(*eta0 > 0.0 && eta0.is_finite()) {
                    push(&mut bad, "eta", format!("eta not positive: {eta0}"));
                }
            }
        }
        match &self.sigma {
            SigmaSpec::Constant { sigma0 } => {
                if !(*sigma0 > 0.0 && sigma0.is_finite()) {
                    push(
                        &mut bad,
                        "sigma",
                        format!("sigma must be positive and finite, got {sigma0}"),
                    );
                }
            }
            SigmaSpec::LogPoly {
                sigma0,
                sigma1,
                sigma2,
                clamp_lo,
                clamp_hi,
            } => {
                if ![sigma0, sigma1, sigma2].iter().all(|v| v.is_finite()) {
                    push(
                        &mut bad,
                        "sigma",
                        "sigma coefficients must be finite".into(),
                    );
                }
                if !(*clamp_lo > 0.0 && clamp_lo <= clamp_hi && clamp_hi.is_finite()) {
                    push(&mut bad, "sigma", format!("sigma clamp must satisfy 0 < lo <= hi < inf, got [{clamp_lo}, {clamp_hi}]"));
                }
            }
        }

        // Numerical sweep on a log grid: bounds, and a Lipschitz constant in
        // log coordinates (Hoelder exponent 1).
        let mut warnings = Vec::new();
        if bad.is_empty() {
            const N: usize = 4001;
            const SPAN: f64 = 20.0;
            let grid = |i: usize| -SPAN + 2.0 * SPAN * i as f64 / (N - 1) as f64;
            let (mut e_min, mut e_max, mut e_lip) = (f64::INFINITY, 0.0f64, 0.0f64);
            let (mut s_min, mut s_max, mut s_lip) = (f64::INFINITY, 0.0f64, 0.0f64);
            let (mut increasing, mut decreasing) = (false, false);
            let mut prev: Option<(f64, f64, f64)> = None;
            for i in 0..N {
                let u = grid(i);
                let e = self.eta.value(u);
                let s = self.sigma.value(u);
                e_min = e_min.min(e);
                e_max = e_max.max(e);
                s_min = s_min.min(s);
                s_max = s_max.max(s);
                if let Some((pu, pe, ps)) = prev {
                    let h = u - pu;
                    e_lip = e_lip.max((e - pe).abs() / h);
                    s_lip = s_lip.max((s - ps).abs() / h);
                    if e > pe {
                        increasing = true;
                    }
                    if e < pe {
                        decreasing = true;
                    }
                }
                prev = Some((u, e, s));
            }
            if !(e_min > 0.0) || !e_max.is_finite() {
                push(
                    &mut bad,
                    "eta",
                    format!("eta leaves (0, inf) on the log grid: [{e_min}, {e_max}]"),
                );
            }
            if !(s_min > 0.0) || !s_max.is_finite() {
                push(
                    &mut bad,
                    "sigma",
                    format!("sigma leaves (0, inf) on the log grid: [{s_min}, {s_max}]"),
                );
            }
            if !(e_lip.is_finite() && e_lip < 1e8) {
                push(
                    &mut bad,
                    "eta",
                    format!("eta is not Lipschitz in log-price (slope {e_lip})"),
                );
            }
            if !(s_lip.is_finite() && s_lip < 1e8) {
                push(
                    &mut bad,
                    "sigma",
                    format!("sigma is not Lipschitz in log-variance (slope {s_lip})"),
                );
            }
            if increasing && decreasing {
                warnings.push(
                    "eta is not monotone; zero-correlation closed form assumes a monotone eta"
                        .into(),
                );
            } else if increasing {
                warnings.push("eta is increasing (no leverage effect)".into());
            }
        }

        if !bad.is_empty() {
            return Err(Error::InvalidModel(bad));
        }
        let moneyness = match strike {
            Some(k) if !(k > 0.0 && k.is_finite()) => {
                return Err(Error::Domain(format!("strike must be positive, got {k}")))
            }
            Some(k) => Some(self.moneyness(k)),
            None => None,
        };
        Ok(ValidationReport {
            forward_limit: self.forward_variance_limit(),
            moneyness,
            warnings,
        })
    }
}
