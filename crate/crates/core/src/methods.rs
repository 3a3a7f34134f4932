//! Rate-function strategies selectable by name.

use serde::Serialize;

use crate::atm::atm_rate_approx;
use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::rate_general::{
    rate_bounds_rho, rate_numeric, rate_perfect_corr, BoundsResult, NumericOptions,
};
use crate::rate_result::RateResult;
use crate::rate_zero::{rate_zero_rho, ZeroRhoOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateEstimate {
    Point(RateResult),
    /// Two-sided bounds; no point estimate is implied.
    Interval {
        lower: f64,
        upper: f64,
        detail: BoundsResult,
    },
}

impl RateEstimate {
    pub fn method(&self) -> &str {
        match self {
            RateEstimate::Point(r) => &r.method,
            RateEstimate::Interval { .. } => "bounds",
        }
    }
}

pub trait RateMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, model: &LsvModel, k: f64) -> Result<RateEstimate>;
}

/// Exact solutions: the uncorrelated minimization and the perfect-correlation
/// reduction.
pub struct Closed;

impl RateMethod for Closed {
    fn name(&self) -> &'static str {
        "closed"
    }

    fn estimate(&self, model: &LsvModel, k: f64) -> Result<RateEstimate> {
        let r = if model.rho == 0.0 {
            rate_zero_rho(model, k, &ZeroRhoOptions::default())?
        } else if model.rho.abs() == 1.0 {
            rate_perfect_corr(model, k, model.rho)?
        } else {
            return Err(Error::Unsupported(format!(
                "no closed form at rho = {}; use bounds, numeric or expansion",
                model.rho
            )));
        };
        Ok(RateEstimate::Point(r))
    }
}

pub struct Bounds;

impl RateMethod for Bounds {
    fn name(&self) -> &'static str {
        "bounds"
    }

    fn estimate(&self, model: &LsvModel, k: f64) -> Result<RateEstimate> {
        let detail = rate_bounds_rho(model, k)?;
        Ok(RateEstimate::Interval {
            lower: detail.lower,
            upper: detail.best_upper,
            detail,
        })
    }
}

pub struct Numeric(pub NumericOptions);

impl RateMethod for Numeric {
    fn name(&self) -> &'static str {
        "numeric"
    }

    fn estimate(&self, model: &LsvModel, k: f64) -> Result<RateEstimate> {
        if model.rho.abs() == 1.0 {
            return Ok(RateEstimate::Point(rate_perfect_corr(model, k, model.rho)?));
        }
        Ok(RateEstimate::Point(rate_numeric(model, k, &self.0)?))
    }
}

/// Cubic expansion around the money.
pub struct Expansion;

impl RateMethod for Expansion {
    fn name(&self) -> &'static str {
        "expansion"
    }

    fn estimate(&self, model: &LsvModel, k: f64) -> Result<RateEstimate> {
        Ok(RateEstimate::Point(RateResult::simple(
            "expansion",
            atm_rate_approx(model, k)?,
        )))
    }
}

pub struct RateRegistry {
    methods: Vec<Box<dyn RateMethod>>,
}

impl Default for RateRegistry {
    fn default() -> Self {
        let mut r = RateRegistry {
            methods: Vec::new(),
        };
        r.register(Box::new(Closed));
        r.register(Box::new(Bounds));
        r.register(Box::new(Numeric(NumericOptions::default())));
        r.register(Box::new(Expansion));
        r
    }
}

impl RateRegistry {
    /// Adds a method, replacing any existing one with the same name.
    pub fn register(&mut self, method: Box<dyn RateMethod>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn RateMethod> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown rate method '{name}' (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let reg = RateRegistry::default();
        assert_eq!(reg.names(), ["closed", "bounds", "numeric", "expansion"]);
        assert!(reg.get("spline").is_err());
        let m = LsvModel::tanh_reference(0.3);
        assert!(matches!(
            reg.get("closed").unwrap().estimate(&m, 0.11),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            reg.get("bounds").unwrap().estimate(&m, 0.11).unwrap(),
            RateEstimate::Interval { .. }
        ));
    }

    #[test]
    fn registration_replaces() {
        struct Zero;
        impl RateMethod for Zero {
            fn name(&self) -> &'static str {
                "expansion"
            }
            fn estimate(&self, _: &LsvModel, _: f64) -> Result<RateEstimate> {
                Ok(RateEstimate::Point(RateResult::simple("expansion", 0.0)))
            }
        }
        let mut reg = RateRegistry::default();
        reg.register(Box::new(Zero));
        assert_eq!(reg.names().len(), 4);
        match reg
            .get("expansion")
            .unwrap()
            .estimate(&LsvModel::tanh_reference(0.0), 0.2)
            .unwrap()
        {
            RateEstimate::Point(r) => assert_eq!(r.value, 0.0),
            _ => unreachable!(),
        }
    }
}
