//! Black representation of variance-option prices, implied-vol inversion and
//! the short-maturity smile implied by the rate function.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::atm::{atm_coefficients, LocalCoefficients};
use crate::error::{Error, Result};
use crate::methods::{RateEstimate, RateRegistry};
use crate::model::{LsvModel, Moneyness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionFlag {
    Call,
    Put,
}

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Black price of a call or put on a variance forward `f`.
pub fn black_price(f: f64, k: f64, sigma: f64, t: f64, r: f64, flag: OptionFlag) -> Result<f64> {
    check_positive("forward", f)?;
    check_positive("strike", k)?;
    check_positive("volatility", sigma)?;
    check_positive("maturity", t)?;
    let df = (-r * t).exp();
    let sd = sigma * t.sqrt();
    let d1 = (f / k).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    Ok(match flag {
        OptionFlag::Call => df * (f * norm_cdf(d1) - k * norm_cdf(d2)),
        OptionFlag::Put => df * (k * norm_cdf(-d2) - f * norm_cdf(-d1)),
    })
}

/// Sensitivity of the Black price to `sigma` (same for calls and puts).
pub fn black_vega(f: f64, k: f64, sigma: f64, t: f64, r: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_positive("strike", k)?;
    check_positive("volatility", sigma)?;
    check_positive("maturity", t)?;
    let sd = sigma * t.sqrt();
    let d1 = (f / k).ln() / sd + 0.5 * sd;
    Ok((-r * t).exp() * f * norm_pdf(d1) * t.sqrt())
}

pub const IVOL_FLOOR: f64 = 1e-8;
pub const IVOL_CEILING: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpliedVol {
    pub vol: f64,
    /// Set when the price is too flat in volatility to pin the answer down.
    pub warning: Option<String>,
}

/// Inverts [`black_price`] by bisection on `[1e-8, 10]` followed by a few
/// Newton steps.
pub fn implied_vol(
    price: f64,
    f: f64,
    k: f64,
    t: f64,
    r: f64,
    flag: OptionFlag,
) -> Result<ImpliedVol> {
    check_positive("forward", f)?;
    check_positive("strike", k)?;
    check_positive("maturity", t)?;
    let df = (-r * t).exp();
    let (lower, upper) = match flag {
        OptionFlag::Call => (df * (f - k).max(0.0), df * f),
        OptionFlag::Put => (df * (k - f).max(0.0), df * k),
    };
    if !(price >= lower && price < upper) {
        return Err(Error::Arbitrage {
            price,
            lower,
            upper,
        });
    }
    let px = |s: f64| black_price(f, k, s, t, r, flag).expect("inputs checked");
    let (p_lo, p_hi) = (px(IVOL_FLOOR), px(IVOL_CEILING));
    if price <= p_lo {
        return Ok(ImpliedVol {
            vol: IVOL_FLOOR,
            warning: Some(format!(
                "price at or below the floor-vol price {p_lo:e}; vega underflows"
            )),
        });
    }
    if price >= p_hi {
        return Ok(ImpliedVol {
            vol: IVOL_CEILING,
            warning: Some(format!("price at or above the ceiling-vol price {p_hi:e}")),
        });
    }
    let (mut lo, mut hi) = (IVOL_FLOOR, IVOL_CEILING);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if px(mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut vol = 0.5 * (lo + hi);
    for _ in 0..8 {
        let diff = px(vol) - price;
        if diff.abs() <= 1e-15 * f {
            break;
        }
        let vega = black_vega(f, k, vol, t, r).expect("inputs checked");
        let next = vol - diff / vega;
        if !(vega > 0.0) || !(next > lo * 0.5 && next < hi * 2.0) {
            break;
        }
        vol = next;
    }
    let miss = (px(vol) - price).abs();
    let warning =
        (miss > 1e-12 * f).then(|| format!("price matched only to {miss:e}; vega too flat"));
    Ok(ImpliedVol { vol, warning })
}

/// Limit of the implied vol at the money, `sqrt(1/(2A))`.
pub fn atm_implied_vol(model: &LsvModel) -> Result<f64> {
    let c = atm_coefficients(model)?;
    Ok((1.0 / (2.0 * c.a)).sqrt())
}

/// ATM skew `N / (10 sqrt(3) D^{3/2})` of the limiting smile in log-moneyness.
pub fn atm_skew(model: &LsvModel) -> Result<f64> {
    let c = atm_coefficients(model)?;
    let n = LocalCoefficients::of(model).cubic_numerator();
    Ok(n / (10.0 * 3f64.sqrt() * c.d.powf(1.5)))
}

/// `Sigma_ATM + s_V x`.
pub fn linear_smile(model: &LsvModel, x: f64) -> Result<f64> {
    Ok(atm_implied_vol(model)? + atm_skew(model)? * x)
}

/// One strike of a limiting smile. Point methods fill `sigma_v`; the bounds
/// method fills only the interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmilePoint {
    pub k: f64,
    pub x: f64,
    pub sigma_v: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Black price at `sigma_v` when a maturity is attached.
    pub price: Option<f64>,
    pub method: String,
}

fn vol_from_rate(x: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Degenerate(format!(
            "rate function {rate:e} is not positive away from the money (x = {x})"
        )));
    }
    Ok(x.abs() / (2.0 * rate).sqrt())
}

/// Limiting implied vol `Sigma_V^2 = x^2 / (2 I)` with `I` from the named
/// rate method.
pub fn asymptotic_smile(model: &LsvModel, k: f64, method: &str) -> Result<SmilePoint> {
    check_positive("strike", k)?;
    let registry = RateRegistry::default();
    let m = registry.get(method)?;
    let x = model.log_moneyness(k);
    let mut point = SmilePoint {
        k,
        x,
        sigma_v: None,
        lo: None,
        hi: None,
        price: None,
        method: m.name().to_string(),
    };
    if model.moneyness(k) == Moneyness::Atm {
        point.sigma_v = Some(atm_implied_vol(model)?);
        return Ok(point);
    }
    match m.estimate(model, k)? {
        RateEstimate::Point(r) => point.sigma_v = Some(vol_from_rate(x, r.value)?),
        RateEstimate::Interval { lower, upper, .. } => {
            point.lo = Some(vol_from_rate(x, upper)?);
            point.hi = Some(vol_from_rate(x, lower)?);
        }
    }
    Ok(point)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileCurve {
    pub points: Vec<SmilePoint>,
}

impl SmileCurve {
    pub fn from_log_moneyness(model: &LsvModel, xs: &[f64], method: &str) -> Result<Self> {
        let f0 = model.forward_variance_limit();
        let points = xs
            .iter()
            .map(|&x| {
                let mut p = asymptotic_smile(model, f0 * x.exp(), method)?;
                p.x = x;
                Ok(p)
            })
            .collect::<Result<_>>()?;
        Ok(SmileCurve { points })
    }

    pub fn from_strikes(model: &LsvModel, strikes: &[f64], method: &str) -> Result<Self> {
        let points = strikes
            .iter()
            .map(|&k| asymptotic_smile(model, k, method))
            .collect::<Result<_>>()?;
        Ok(SmileCurve { points })
    }

    /// Attaches OTM Black prices at maturity `t`, using the limiting forward.
    pub fn with_prices(mut self, model: &LsvModel, t: f64) -> Result<Self> {
        let f0 = model.forward_variance_limit();
        for p in &mut self.points {
            if let Some(s) = p.sigma_v {
                let flag = if p.k >= f0 {
                    OptionFlag::Call
                } else {
                    OptionFlag::Put
                };
                p.price = Some(black_price(f0, p.k, s, t, model.r, flag)?);
            }
        }
        Ok(self)
    }

    /// CSV with columns `K, x, sigma_v, method, lo, hi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Domain(format!("writing smile CSV: {e}"));
        w.write_record(["K", "x", "sigma_v", "method", "lo", "hi"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.points {
            w.write_record([
                p.k.to_string(),
                p.x.to_string(),
                opt(p.sigma_v),
                p.method.clone(),
                opt(p.lo),
                opt(p.hi),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Domain(format!("writing smile CSV: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_limits() {
        let c = black_price(0.12, 0.1, 1e-9, 0.5, 0.03, OptionFlag::Call).unwrap();
        assert!((c - (-0.015f64).exp() * 0.02).abs() < 1e-14);
        let (c, p) = (
            black_price(0.1, 0.1, 1.2, 0.25, 0.0, OptionFlag::Call).unwrap(),
            black_price(0.1, 0.1, 1.2, 0.25, 0.0, OptionFlag::Put).unwrap(),
        );
        let expect = 0.1 * (2.0 * norm_cdf(0.6 * 0.5) - 1.0);
        assert!((c - expect).abs() < 1e-16 && (p - expect).abs() < 1e-16);
        assert!(black_price(0.1, 0.0, 1.0, 1.0, 0.0, OptionFlag::Call).is_err());
    }

    #[test]
    fn norm_cdf_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-10.0) - 7.619_853_024_160_527e-24).abs() < 1e-36);
    }

    #[test]
    fn implied_vol_round_trip_and_edges() {
        let p = black_price(0.1, 0.12, 1.15, 1.0 / 12.0, 0.0, OptionFlag::Call).unwrap();
        let iv = implied_vol(p, 0.1, 0.12, 1.0 / 12.0, 0.0, OptionFlag::Call).unwrap();
        assert!((iv.vol - 1.15).abs() < 1e-10 && iv.warning.is_none());
        let floor = implied_vol(0.0, 0.1, 0.12, 1.0 / 12.0, 0.0, OptionFlag::Call).unwrap();
        assert!(floor.vol <= 1e-6 && floor.warning.is_some());
        assert!(matches!(
            implied_vol(0.1, 0.1, 0.12, 1.0 / 12.0, 0.0, OptionFlag::Call),
            Err(Error::Arbitrage { .. })
        ));
        assert!(matches!(
            implied_vol(0.01, 0.1, 0.12, 1.0, 0.0, OptionFlag::Put),
            Err(Error::Arbitrage { .. })
        ));
    }

    #[test]
    fn reference_atm_levels_and_skews() {
        // Exact values of the level formula; the tabulated -0.7 level reads 1.1806.
        let cases = [
            (-0.7, 1.180_548_96, Some(0.1257)),
            (0.0, 1.155_277_74, None),
            (0.7, 1.129_441_23, Some(0.1053)),
        ];
        for (rho, level, skew) in cases {
            let m = LsvModel::tanh_reference(rho);
            assert!(
                (atm_implied_vol(&m).unwrap() - level).abs() < 1e-8,
                "rho {rho}"
            );
            if let Some(s) = skew {
                assert!((atm_skew(&m).unwrap() - s).abs() < 5e-5, "rho {rho}");
            }
        }
        // Direct evaluation of the skew formula at rho = 0.
        let s0 = atm_skew(&LsvModel::tanh_reference(0.0)).unwrap();
        assert!((s0 - 16.08002 / (10.0 * 3f64.sqrt() * 4.004f64.powf(1.5))).abs() < 1e-6);
        assert!((s0 - 0.1159).abs() < 5e-5);
    }

    #[test]
    fn constant_eta_level() {
        let mut m = LsvModel::tanh_reference(0.3);
        m.eta = crate::model::EtaSpec::Constant { eta0: 1.0 };
        let s = atm_implied_vol(&m).unwrap();
        assert!((s - 2.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn atm_smile_is_the_limit() {
        let m = LsvModel::tanh_reference(0.0);
        for method in ["closed", "bounds", "numeric", "expansion"] {
            let p = asymptotic_smile(&m, 0.1, method).unwrap();
            assert_eq!(p.sigma_v, Some(atm_implied_vol(&m).unwrap()));
            assert_eq!(p.sigma_v, Some(linear_smile(&m, 0.0).unwrap()));
        }
    }

    #[test]
    fn closed_smile_near_linear() {
        let m = LsvModel::tanh_reference(0.0);
        let p = asymptotic_smile(&m, 0.1 * 0.1f64.exp(), "closed").unwrap();
        assert!((p.sigma_v.unwrap() - linear_smile(&m, 0.1).unwrap()).abs() < 2e-2);
    }

    #[test]
    fn bounds_smile_is_interval() {
        let m = LsvModel::tanh_reference(0.7);
        let p = asymptotic_smile(&m, 0.11, "bounds").unwrap();
        assert!(p.sigma_v.is_none());
        let (lo, hi) = (p.lo.unwrap(), p.hi.unwrap());
        let exact = asymptotic_smile(&m, 0.11, "numeric")
            .unwrap()
            .sigma_v
            .unwrap();
        assert!(lo <= exact && exact <= hi, "{lo} {exact} {hi}");
    }

    #[test]
    fn csv_layout() {
        let m = LsvModel::tanh_reference(-0.7);
        let curve = SmileCurve::from_log_moneyness(&m, &[-0.05, 0.0, 0.05], "bounds").unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "K,x,sigma_v,method,lo,hi");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(",,bounds,") || lines[1].split(',').nth(2) == Some(""));
    }
}
