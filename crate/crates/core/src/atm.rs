//! Expansion of the rate function around the money,
//! `I(K) = A x^2 + B x^3 + O(x^4)` with `x = ln(K / (eta0^2 V0))`, the
//! optimal paths to second order in `x`, and the at-the-money price limit.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::paths::PathPair;

/// Local coefficients of the model at the spot and initial variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalCoefficients {
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub rho: f64,
    pub v0: f64,
}

impl LocalCoefficients {
    pub fn of(model: &LsvModel) -> Self {
        let (eta0, eta1, eta2) = model.eta_log_coeffs();
        let (sigma0, sigma1, _) = model.sigma_log_coeffs();
        LocalCoefficients {
            eta0,
            eta1,
            eta2,
            sigma0,
            sigma1,
            rho: model.rho,
            v0: model.v0,
        }
    }

    /// `D = sigma0^2 + 4 rho sigma0 sqrt(V0) eta1 + 4 eta1^2 V0`.
    pub fn d(&self) -> f64 {
        let sv = self.v0.sqrt();
        self.sigma0 * self.sigma0
            + 4.0 * self.rho * self.sigma0 * sv * self.eta1
            + 4.0 * self.eta1 * self.eta1 * self.v0
    }

    /// `(beta0, beta1, beta2)` of the cubic numerator.
    pub fn betas(&self) -> [f64; 3] {
        let LocalCoefficients {
            eta0: e0,
            eta1: e1,
            eta2: e2,
            sigma1: s1,
            rho,
            v0,
            ..
        } = *self;
        let sv = v0.sqrt();
        let beta0 = 16.0 * e1 * e1 * v0 * v0 * (e1 * e1 + 6.0 * e0 * e2);
        let beta1 =
            8.0 * e1 * rho * v0 * (3.0 * e1 * rho * s1 + 7.0 * e1 * e1 * sv + 12.0 * e0 * e2 * sv);
        let beta2 = 4.0
            * (6.0 * e1 * rho * s1 * sv
                + 6.0 * e0 * e2 * rho * rho * v0
                + e1 * e1 * (5.0 + 7.0 * rho * rho) * v0);
        [beta0, beta1, beta2]
    }

    /// Numerator `N` of the cubic coefficient, `B = -3 N / (10 D^3)`.
    pub fn cubic_numerator(&self) -> f64 {
        let [beta0, beta1, beta2] = self.betas();
        let (s0, s1) = (self.sigma0, self.sigma1);
        let sv = self.v0.sqrt();
        s0.powi(4)
            + 2.0 * s0.powi(3) * (3.0 * s1 + 7.0 * self.eta1 * self.rho * sv)
            + beta2 * s0 * s0
            + beta1 * s0
            + beta0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtmCoefficients {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

pub fn atm_coefficients(model: &LsvModel) -> Result<AtmCoefficients> {
    let c = LocalCoefficients::of(model);
    let d = c.d();
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!(
            "quadratic coefficient undefined: sigma0^2 + 4 rho sigma0 sqrt(V0) eta1 + 4 eta1^2 V0 = {d}"
        )));
    }
    Ok(AtmCoefficients {
        a: 1.5 / d,
        b: -0.3 * c.cubic_numerator() / d.powi(3),
        d,
    })
}

/// `A x^2 + B x^3` at log-moneyness `x`.
pub fn rate_expansion(model: &LsvModel, x: f64) -> Result<f64> {
    let c = atm_coefficients(model)?;
    Ok(c.a * x * x + c.b * x * x * x)
}

/// `A x^2 + B x^3` at log-moneyness of `K`.
pub fn atm_rate_approx(model: &LsvModel, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("strike must be positive, got {k}")));
    }
    let c = atm_coefficients(model)?;
    let x = model.log_moneyness(k);
    Ok(c.a * x * x + c.b * x * x * x)
}

/// Limit of `C(K = forward, T) / sqrt(T)` as `T -> 0`:
/// `eta0^2 V0 sqrt(D) / sqrt(6 pi)`.
pub fn atm_price_limit(model: &LsvModel) -> Result<f64> {
    let c = atm_coefficients(model)?;
    Ok(model.forward_variance_limit() * c.d.sqrt() / (6.0 * PI).sqrt())
}

/// Coefficients of the optimal log-deviation paths to second order:
/// `g = x g1 + x^2 g2`, `h = x h1 + x^2 h2` with
/// `g1 = p (2t - t^2)`, `g2 = a t(t-2)/2 + b t(t^2-3)/6 + c t(t^3-4)/12`
/// and likewise for `h` with barred coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionPaths {
    pub g1: f64,
    pub h1: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
}

fn poly(cs: &[f64], s: f64) -> f64 {
    cs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

impl ExpansionPaths {
    pub fn of(model: &LsvModel) -> Result<Self> {
        let k = LocalCoefficients::of(model);
        let d = atm_coefficients(model)?.d;
        let LocalCoefficients {
            eta0: e0,
            eta1: e1,
            eta2: e2,
            sigma0: s0,
            sigma1: s1,
            rho,
            v0,
        } = k;
        let sv = v0.sqrt();
        let v32 = v0 * sv;
        let v52 = v0 * v0 * sv;
        let r2 = rho * rho;
        let r3 = r2 * rho;

        let cs = [
            64.0 * e1.powi(3) * (14.0 * e1 * e1 + 9.0 * e0 * e2) * v52,
            144.0 * e1.powi(3) * r2 * s1 * v32
                + 16.0 * e1 * e1 * (149.0 * e1 * e1 + 54.0 * e0 * e2) * rho * v0 * v0,
            144.0 * e1 * e1 * rho * s1 * v0
                + 72.0 * e1 * e1 * r3 * s1 * v0
                + 640.0 * e1.powi(3) * v32
                + 8.0 * e1 * (227.0 * e1 * e1 + 54.0 * e0 * e2) * r2 * v32,
            36.0 * e1 * s1 * sv
                + 72.0 * e1 * r2 * s1 * sv
                + 864.0 * e1 * e1 * rho * v0
                + 4.0 * (91.0 * e1 * e1 + 18.0 * e0 * e2) * r3 * v0,
            18.0 * rho * s1 + 86.0 * e1 * sv + 212.0 * e1 * r2 * sv,
            28.0 * rho,
        ];
        let ds = [
            8.0 * e0 * e1 * v0 * v0 * (5.0 * e1 * e1 + 2.0 * e0 * e2),
            4.0 * e0 * e1 * r2 * s1 * v0 + 8.0 * e0 * (8.0 * e1 * e1 + e0 * e2) * rho * v32,
            2.0 * e0 * rho * s1 * sv + 16.0 * e0 * e1 * v0 + 16.0 * e0 * e1 * r2 * v0,
            5.0 * e0 * rho * sv,
        ];
        let cs_bar = [
            32.0 * (15.0 * e1.powi(4) * r2 * s1 * v0 * v0
                + 13.0 * e1.powi(5) * rho * v52
                + 18.0 * e0 * e1.powi(3) * e2 * rho * v52),
            16.0 * (30.0 * e1.powi(3) * rho * s1 * v32 + 39.0 * e1.powi(3) * r3 * s1 * v32
                - 2.0 * e1.powi(4) * v0 * v0
                + 18.0 * e0 * e1 * e1 * e2 * v0 * v0
                + 76.0 * e1.powi(4) * r2 * v0 * v0
                + 36.0 * e0 * e1 * e1 * e2 * r2 * v0 * v0),
            8.0 * (15.0 * e1 * e1 * s1 * v0
                + 102.0 * e1 * e1 * r2 * s1 * v0
                + 66.0 * e1.powi(3) * rho * v32
                + 36.0 * e0 * e1 * e2 * rho * v32
                + 91.0 * e1.powi(3) * r3 * v32
                + 18.0 * e0 * e1 * e2 * r3 * v32),
            4.0 * (87.0 * e1 * rho * s1 * sv
                + 20.0 * e1 * e1 * v0
                + 137.0 * e1 * e1 * r2 * v0
                + 18.0 * e0 * e2 * r2 * v0),
            4.0 * (12.0 * s1 + 37.0 * e1 * rho * sv),
            13.0,
        ];
        let ds_bar = [
            4.0 * e1 * rho * (3.0 * e1 * rho * s1 + 2.0 * e1 * e1 * sv + 2.0 * e0 * e2 * sv) * v0,
            2.0 * (7.0 * e1 * rho * s1 * sv + 7.0 * e1 * e1 * r2 * v0 + 2.0 * e0 * e2 * r2 * v0),
            4.0 * s1 + 7.0 * e1 * rho * sv,
            1.0,
        ];
        let d2 = d * d;
        let d3 = d2 * d;
        let pd = poly(&ds, s0);
        let pdb = poly(&ds_bar, s0);
        Ok(ExpansionPaths {
            g1: 1.5 * (2.0 * e1 * sv + rho * s0) * sv * e0 / d,
            h1: 1.5 * s0 * (s0 + 2.0 * e1 * rho * sv) / d,
            a: 0.3 * e0 * sv * poly(&cs, s0) / d3,
            b: -4.5 * pd / d2,
            c: 2.25 * pd / d2,
            a_bar: 0.3 * s0 * poly(&cs_bar, s0) / d3,
            b_bar: -9.0 * s0 * pdb / d2,
            c_bar: 4.5 * s0 * pdb / d2,
        })
    }

    pub fn g1_at(&self, t: f64) -> f64 {
        self.g1 * t * (2.0 - t)
    }

    pub fn h1_at(&self, t: f64) -> f64 {
        self.h1 * t * (2.0 - t)
    }

    fn second(a: f64, b: f64, c: f64, t: f64) -> f64 {
        0.5 * a * t * (t - 2.0) + b * t * (t * t - 3.0) / 6.0 + c * t * (t.powi(3) - 4.0) / 12.0
    }

    pub fn g2_at(&self, t: f64) -> f64 {
        Self::second(self.a, self.b, self.c, t)
    }

    pub fn h2_at(&self, t: f64) -> f64 {
        Self::second(self.a_bar, self.b_bar, self.c_bar, t)
    }

    /// Absolute log-price and log-variance paths at log-moneyness `x`,
    /// truncated after `order` (1 or 2) terms.
    pub fn paths(&self, model: &LsvModel, x: f64, order: usize, n: usize) -> PathPair {
        let (ls0, lv0) = (model.s0.ln(), model.v0.ln());
        let second = if order >= 2 { x * x } else { 0.0 };
        PathPair::from_fn(
            n,
            |t| ls0 + x * self.g1_at(t) + second * self.g2_at(t),
            |t| lv0 + x * self.h1_at(t) + second * self.h2_at(t),
        )
    }
}

/// Everything the expansion around the money provides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtmExpansion {
    pub coefficients: AtmCoefficients,
    pub betas: [f64; 3],
    pub paths: ExpansionPaths,
}

pub fn atm_expansion(model: &LsvModel) -> Result<AtmExpansion> {
    Ok(AtmExpansion {
        coefficients: atm_coefficients(model)?,
        betas: LocalCoefficients::of(model).betas(),
        paths: ExpansionPaths::of(model)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityPoint {
    pub x: f64,
    pub expansion: f64,
    pub reference: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionValidity {
    pub points: Vec<ValidityPoint>,
    /// Smallest `|x|` on the scan where the deviation exceeds `threshold`.
    pub first_exceeding: Option<f64>,
    pub threshold: f64,
}

/// Compares the cubic expansion with the numerically solved rate function on
/// the log-moneyness values `xs`, reporting where the relative deviation
/// first exceeds 10%.
pub fn expansion_validity(model: &LsvModel, xs: &[f64]) -> Result<ExpansionValidity> {
    const THRESHOLD: f64 = 0.1;
    let numeric = crate::methods::Numeric(Default::default());
    let f0 = model.forward_variance_limit();
    let mut points = Vec::new();
    for &x in xs.iter().filter(|x| **x != 0.0) {
        let reference = match crate::methods::RateMethod::estimate(&numeric, model, f0 * x.exp())? {
            crate::methods::RateEstimate::Point(r) => r.value,
            crate::methods::RateEstimate::Interval { .. } => unreachable!("numeric gives points"),
        };
        let expansion = rate_expansion(model, x)?;
        points.push(ValidityPoint {
            x,
            expansion,
            reference,
            relative_deviation: (expansion - reference).abs() / reference,
        });
    }
    let first_exceeding = points
        .iter()
        .filter(|p| p.relative_deviation > THRESHOLD)
        .map(|p| p.x.abs())
        .min_by(f64::total_cmp);
    Ok(ExpansionValidity {
        points,
        first_exceeding,
        threshold: THRESHOLD,
    })
}
