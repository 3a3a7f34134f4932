use serde::Serialize;

use crate::error::{Error, Result};

/// Discretized log-price and log-variance paths `(g, h)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPair {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| i as f64 / last).collect()
}

impl PathPair {
    pub fn from_fn(n: usize, g: impl Fn(f64) -> f64, h: impl Fn(f64) -> f64) -> Self {
        let t = uniform_grid(n.max(2));
        let g = t.iter().map(|&s| g(s)).collect();
        let h = t.iter().map(|&s| h(s)).collect();
        PathPair { t, g, h }
    }

    pub fn constant(n: usize, g0: f64, h0: f64) -> Self {
        Self::from_fn(n, |_| g0, |_| h0)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 || self.g.len() != n || self.h.len() != n {
            return Err(Error::Domain(format!(
                "paths need matching lengths >= 2 (t: {n}, g: {}, h: {})",
                self.g.len(),
                self.h.len()
            )));
        }
        if self.t[0] != 0.0 || (self.t[n - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("time grid must run from 0 to 1".into()));
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "time grid must be strictly increasing".into(),
            ));
        }
        if self.g.iter().chain(&self.h).any(|v| !v.is_finite()) {
            return Err(Error::Domain("paths must be finite".into()));
        }
        Ok(())
    }

    /// Linear interpolation of both paths onto a uniform grid of `n` nodes.
    pub fn resample(&self, n: usize) -> PathPair {
        let interp = |ys: &[f64], s: f64| {
            let i = match self.t.binary_search_by(|x| x.total_cmp(&s)) {
                Ok(i) => return ys[i],
                Err(i) => i.clamp(1, self.t.len() - 1),
            };
            let (t0, t1) = (self.t[i - 1], self.t[i]);
            let w = (s - t0) / (t1 - t0);
            ys[i - 1] * (1.0 - w) + ys[i] * w
        };
        PathPair::from_fn(n, |s| interp(&self.g, s), |s| interp(&self.h, s))
    }
}
