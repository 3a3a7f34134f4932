//! The action
//!
//! ```text
//! Lambda[g, h] = 1/(2(1 - rho^2)) int (g'/(eta(e^g) e^(h/2)) - rho h'/sigma(e^h))^2 dt
//!              + 1/2 int (h'/sigma(e^h))^2 dt
//! ```
//!
//! and the average-variance constraint `int e^h eta^2(e^g) dt = K`, both on
//! piecewise-linear paths. Slopes are taken per segment and the integrand is
//! evaluated at segment midpoints; the constraint uses the trapezoid rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::paths::PathPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaValue {
    pub g_cost: f64,
    pub h_cost: f64,
    pub total: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "the action is singular at |rho| = 1 (rho = {rho}); use the perfect-correlation reduction"
        )));
    }
    Ok(())
}

/// Discretized action and constraint with analytic gradients in the node values.
pub(crate) struct Discrete<'a> {
    model: &'a LsvModel,
    ls0: f64,
    lv0: f64,
    pub(crate) t: &'a [f64],
}

impl<'a> Discrete<'a> {
    pub(crate) fn new(model: &'a LsvModel, t: &'a [f64]) -> Self {
        Discrete {
            model,
            ls0: model.s0.ln(),
            lv0: model.v0.ln(),
            t,
        }
    }

    /// Returns `(g_cost, h_cost)`; accumulates gradients when buffers are given.
    pub(crate) fn action(
        &self,
        g: &[f64],
        h: &[f64],
        mut grad: Option<(&mut [f64], &mut [f64])>,
    ) -> (f64, f64) {
        let rho = self.model.rho;
        let omr = 1.0 - rho * rho;
        let (mut gc, mut hc) = (0.0, 0.0);
        if let Some((gg, gh)) = grad.as_mut() {
            gg.fill(0.0);
            gh.fill(0.0);
        }
        for i in 0..self.t.len() - 1 {
            let dt = self.t[i + 1] - self.t[i];
            let gp = (g[i + 1] - g[i]) / dt;
            let hp = (h[i + 1] - h[i]) / dt;
            let um = 0.5 * (g[i] + g[i + 1]) - self.ls0;
            let hm = 0.5 * (h[i] + h[i + 1]);
            let wm = hm - self.lv0;
            let eta = self.model.eta.value(um);
            let e = eta * (0.5 * hm).exp();
            let s = self.model.sigma.value(wm);
            let a = gp / e - rho * hp / s;
            let b = hp / s;
            gc += dt * a * a / (2.0 * omr);
            hc += dt * 0.5 * b * b;
            if let Some((gg, gh)) = grad.as_mut() {
                let eta_u = self.model.eta.du(um);
                let s_w = self.model.sigma.dw(wm);
                let d_gp = dt * a / (omr * e);
                let d_hp = dt * (-rho * a / (omr * s) + b / s);
                let d_gm = dt * a / omr * (-(gp / e) * eta_u / eta);
                let d_hm = dt
                    * (a / omr * (-0.5 * gp / e + rho * hp * s_w / (s * s))
                        - b * hp * s_w / (s * s));
                gg[i] += -d_gp / dt + 0.5 * d_gm;
                gg[i + 1] += d_gp / dt + 0.5 * d_gm;
                gh[i] += -d_hp / dt + 0.5 * d_hm;
                gh[i + 1] += d_hp / dt + 0.5 * d_hm;
            }
        }
        (gc, hc)
    }

    fn weight(&self, i: usize) -> f64 {
        let n = self.t.len();
        let left = if i > 0 {
            self.t[i] - self.t[i - 1]
        } else {
            0.0
        };
        let right = if i + 1 < n {
            self.t[i + 1] - self.t[i]
        } else {
            0.0
        };
        0.5 * (left + right)
    }

    /// `int e^h eta^2(e^g) dt`; accumulates gradients when buffers are given.
    pub(crate) fn constraint(
        &self,
        g: &[f64],
        h: &[f64],
        mut grad: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let mut c = 0.0;
        for i in 0..self.t.len() {
            let w = self.weight(i);
            let u = g[i] - self.ls0;
            let eta = self.model.eta.value(u);
            let f = h[i].exp() * eta * eta;
            c += w * f;
            if let Some((gg, gh)) = grad.as_mut() {
                gg[i] = w * h[i].exp() * 2.0 * eta * self.model.eta.du(u);
                gh[i] = w * f;
            }
        }
        c
    }
}

/// Evaluates the action on discretized paths.
pub fn lambda_functional(model: &LsvModel, paths: &PathPair) -> Result<LambdaValue> {
    check_rho(model.rho)?;
    paths.check()?;
    let (g_cost, h_cost) = Discrete::new(model, &paths.t).action(&paths.g, &paths.h, None);
    Ok(LambdaValue {
        g_cost,
        h_cost,
        total: g_cost + h_cost,
    })
}

/// `int_0^1 e^h eta^2(e^g) dt` by the trapezoid rule.
pub fn constraint_value(model: &LsvModel, paths: &PathPair) -> Result<f64> {
    paths.check()?;
    Ok(Discrete::new(model, &paths.t).constraint(&paths.g, &paths.h, None))
}

/// Relative residual of the Euler-Lagrange equations of
/// `Lambda + lambda (int e^h eta^2 dt - K)` at interior nodes, by finite
/// differences. Each equation's residual is scaled by the magnitude of its
/// terms, so the result is dimensionless.
pub fn euler_lagrange_residual(model: &LsvModel, paths: &PathPair, lambda: f64) -> Result<f64> {
    check_rho(model.rho)?;
    paths.check()?;
    let (t, g, h) = (&paths.t, &paths.g, &paths.h);
    let n = t.len();
    if n < 3 {
        return Err(Error::Domain("need at least 3 nodes".into()));
    }
    let rho = model.rho;
    let omr = 1.0 - rho * rho;
    let (ls0, lv0) = (model.s0.ln(), model.v0.ln());
    // Momenta at a state (g, h, g', h').
    let momenta = |gv: f64, hv: f64, gp: f64, hp: f64| {
        let e = model.eta.value(gv - ls0) * (0.5 * hv).exp();
        let s = model.sigma.value(hv - lv0);
        let a = gp / e - rho * hp / s;
        let b = hp / s;
        (a / (omr * e), -rho * a / (omr * s) + b / s)
    };
    let forces = |gv: f64, hv: f64, gp: f64, hp: f64| {
        let u = gv - ls0;
        let eta = model.eta.value(u);
        let eta_u = model.eta.du(u);
        let e = eta * (0.5 * hv).exp();
        let s = model.sigma.value(hv - lv0);
        let s_w = model.sigma.dw(hv - lv0);
        let a = gp / e - rho * hp / s;
        let b = hp / s;
        let fg = a / omr * (-(gp / e) * eta_u / eta) + lambda * hv.exp() * 2.0 * eta * eta_u;
        let fh = a / omr * (-0.5 * gp / e + rho * hp * s_w / (s * s)) - b * hp * s_w / (s * s)
            + lambda * hv.exp() * eta * eta;
        (fg, fh)
    };
    let mut worst = [0.0f64; 2];
    let mut scale = [0.0f64; 2];
    for i in 1..n - 1 {
        let (dl, dr) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let pl = momenta(
            0.5 * (g[i] + g[i - 1]),
            0.5 * (h[i] + h[i - 1]),
            (g[i] - g[i - 1]) / dl,
            (h[i] - h[i - 1]) / dl,
        );
        let pr = momenta(
            0.5 * (g[i] + g[i + 1]),
            0.5 * (h[i] + h[i + 1]),
            (g[i + 1] - g[i]) / dr,
            (h[i + 1] - h[i]) / dr,
        );
        let dtc = 0.5 * (dl + dr);
        let dp = ((pr.0 - pl.0) / dtc, (pr.1 - pl.1) / dtc);
        let gp = (g[i + 1] - g[i - 1]) / (dl + dr);
        let hp = (h[i + 1] - h[i - 1]) / (dl + dr);
        let f = forces(g[i], h[i], gp, hp);
        worst[0] = worst[0].max((dp.0 - f.0).abs());
        worst[1] = worst[1].max((dp.1 - f.1).abs());
        scale[0] = scale[0].max(dp.0.abs() + f.0.abs());
        scale[1] = scale[1].max(dp.1.abs() + f.1.abs());
    }
    let rel = |k: usize| {
        if scale[k] > 0.0 {
            worst[k] / scale[k]
        } else {
            0.0
        }
    };
    Ok(rel(0).max(rel(1)))
}
