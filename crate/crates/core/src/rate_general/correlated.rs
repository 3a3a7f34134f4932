//! Price paths slaved to the variance path.
//!
//! The map `F` defined by
//! `int_{S0}^{F(v)} dy / (y eta(y)) = rho_eff int_{V0}^{v} dy / (sqrt(y) sigma(y))`
//! makes the first term of the action vanish along `g = ln F(e^h)`. What is
//! left is a one-dimensional problem for `h` with constraint
//! `int G(e^h) dt = K`, `G(v) = v eta^2(F(v))`. In the variable
//! `y = ln(G(V0 e^w) / G(V0))` it is the variance-path problem with the
//! effective vol-of-vol `psi'(w) sigma(w)`, where `psi(w) = y`. For
//! `rho = +-1` this is the exact rate function; for `|rho| < 1` with
//! `rho_eff = rho` it is an upper bound.

use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::optim::{lbfgs, LbfgsOptions};
use crate::paths::{uniform_grid, PathPair};
use crate::quad::{find_root, integrate, Bracket, QuadTolerance};
use crate::rate_result::{RateDiagnostics, RateResult};
use crate::rate_zero::{asian_rate_general, AsianBranch};

/// `F(v)` for the coupling strength `rho_eff`.
pub fn f_map_rho(model: &LsvModel, v: f64, rho_eff: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("variance must be positive, got {v}")));
    }
    if !(rho_eff.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "coupling must lie in [-1, 1], got {rho_eff}"
        )));
    }
    let tol = QuadTolerance::default();
    let w = (v / model.v0).ln();
    let rhs = rho_eff
        * model.v0.sqrt()
        * integrate(|s| (0.5 * s).exp() / model.sigma.value(s), 0.0, w, tol)?;
    if rhs == 0.0 {
        return Ok(model.s0);
    }
    if model.eta.is_constant() {
        return Ok(model.s0 * (rhs * model.eta.value(0.0)).exp());
    }
    // The primitive int_0^u du/eta has slope between 1/eta_hi and 1/eta_lo.
    let (lo, hi) = model.eta.bounds();
    let (a, b) = if rhs > 0.0 {
        (rhs * lo, rhs * hi)
    } else {
        (rhs * hi, rhs * lo)
    };
    let pad = 1e-12 * (b - a).abs().max(1e-300);
    let mut failure = None;
    let u = find_root(
        |u| match integrate(|s| 1.0 / model.eta.value(s), 0.0, u, tol) {
            Ok(p) => p - rhs,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        Bracket::new(a - pad, b + pad)?,
        1e-15,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let u = u.map_err(|e| match e {
        Error::Bracket { .. } => {
            Error::Infeasible(format!("log-price primitive cannot reach {rhs}"))
        }
        e => e,
    })?;
    Ok(model.s0 * u.exp())
}

/// Tabulated solution `u(w)` of `du/dw = rho_eff sqrt(V0) e^(w/2) eta(u) / sigma(w)`,
/// `u(0) = 0`, with cubic Hermite interpolation.
pub struct CorrelatedMap<'a> {
    model: &'a LsvModel,
    rho_eff: f64,
    w0: f64,
    step: f64,
    u: Vec<f64>,
    du: Vec<f64>,
    eta0: f64,
    /// Range of `w` around 0 on which `psi' > 0`.
    valid: (f64, f64),
}

const TABLE_SPAN: f64 = 12.0;
const TABLE_STEP: f64 = 1.0 / 256.0;

impl<'a> CorrelatedMap<'a> {
    pub fn new(model: &'a LsvModel, rho_eff: f64) -> Self {
        let slope = |w: f64, u: f64| {
            rho_eff * model.v0.sqrt() * (0.5 * w).exp() * model.eta.value(u) / model.sigma.value(w)
        };
        let n_half = (TABLE_SPAN / TABLE_STEP).round() as usize;
        let n = 2 * n_half + 1;
        let mut u = vec![0.0; n];
        // RK4 outward from w = 0 in both directions, 4 substeps per cell.
        for dir in [1.0f64, -1.0] {
            let mut cur = 0.0;
            for i in 1..=n_half {
                let h = dir * TABLE_STEP / 4.0;
                let mut w = dir * (i - 1) as f64 * TABLE_STEP;
                for _ in 0..4 {
                    let k1 = slope(w, cur);
                    let k2 = slope(w + 0.5 * h, cur + 0.5 * h * k1);
                    let k3 = slope(w + 0.5 * h, cur + 0.5 * h * k2);
                    let k4 = slope(w + h, cur + h * k3);
                    cur += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    w += h;
                }
                let idx = if dir > 0.0 { n_half + i } else { n_half - i };
                u[idx] = cur;
            }
        }
        let w0 = -(n_half as f64) * TABLE_STEP;
        let du: Vec<f64> = (0..n)
            .map(|i| slope(w0 + i as f64 * TABLE_STEP, u[i]))
            .collect();
        let mut map = CorrelatedMap {
            model,
            rho_eff,
            w0,
            step: TABLE_STEP,
            u,
            du,
            eta0: model.eta.value(0.0),
            valid: (0.0, 0.0),
        };
        let dpsi = |i: usize| map.dpsi_at_node(i);
        let (mut lo, mut hi) = (n_half, n_half);
        while hi + 1 < n && dpsi(hi + 1) > 1e-8 {
            hi += 1;
        }
        while lo > 0 && dpsi(lo - 1) > 1e-8 {
            lo -= 1;
        }
        let valid = if dpsi(n_half) > 1e-8 {
            (w0 + lo as f64 * TABLE_STEP, w0 + hi as f64 * TABLE_STEP)
        } else {
            (0.0, 0.0)
        };
        map.valid = valid;
        map
    }

    fn dpsi_at_node(&self, i: usize) -> f64 {
        let u = self.u[i];
        1.0 + 2.0 * self.model.eta.du(u) / self.model.eta.value(u) * self.du[i]
    }

    /// Log-price deviation `ln(F(V0 e^w)/S0)`.
    pub fn u(&self, w: f64) -> f64 {
        let pos = ((w - self.w0) / self.step).clamp(0.0, (self.u.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.u.len() - 2);
        let s = pos - i as f64;
        let h = self.step;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.u[i]
            + (s3 - 2.0 * s2 + s) * h * self.du[i]
            + (-2.0 * s3 + 3.0 * s2) * self.u[i + 1]
            + (s3 - s2) * h * self.du[i + 1]
    }

    /// `psi(w) = ln(G(V0 e^w) / G(V0))`.
    pub fn psi(&self, w: f64) -> f64 {
        w + 2.0 * (self.model.eta.value(self.u(w)) / self.eta0).ln()
    }

    pub fn dpsi(&self, w: f64) -> f64 {
        let u = self.u(w);
        let du = self.rho_eff * self.model.v0.sqrt() * (0.5 * w).exp() * self.model.eta.value(u)
            / self.model.sigma.value(w);
        1.0 + 2.0 * self.model.eta.du(u) / self.model.eta.value(u) * du
    }

    pub fn invertible_range(&self) -> (f64, f64) {
        self.valid
    }

    /// Inverse of `psi` on the invertible range.
    pub fn psi_inverse(&self, y: f64) -> Option<f64> {
        let (lo, hi) = self.valid;
        let (plo, phi) = (self.psi(lo), self.psi(hi));
        if !(y >= plo && y <= phi) || lo == hi {
            return None;
        }
        if y == 0.0 {
            return Some(0.0);
        }
        let (a, b) = if y > 0.0 { (0.0, hi) } else { (lo, 0.0) };
        // Monotone on [a, b]; bisection-safe Brent.
        find_root(|w| self.psi(w) - y, Bracket::new(a, b).ok()?, 1e-15).ok()
    }

    /// Effective vol-of-vol as a function of `y = psi(w)`.
    pub fn sigma_hat(&self, y: f64) -> Option<f64> {
        self.psi_inverse(y)
            .map(|w| self.dpsi(w) * self.model.sigma.value(w))
    }
}

fn direct_one_dim(
    model: &LsvModel,
    map: &CorrelatedMap,
    k: f64,
    n: usize,
) -> Result<(f64, PathPair, bool)> {
    let t = uniform_grid(n);
    let m = n - 1;
    let lv0 = model.v0.ln();
    let sigma0 = model.sigma.value(0.0);
    let dt = 1.0 / m as f64;
    let sq = dt.sqrt();
    let forward = |w: f64| {
        let e = model.eta.value(map.u(w));
        model.v0 * w.exp() * e * e
    };
    let x = (k / model.forward_variance_limit()).ln();
    // Start from the pure variance profile x (2t - t^2) * 1.5.
    let mut y: Vec<f64> = (0..m)
        .map(|j| {
            let (a, b) = (t[j], t[j + 1]);
            let f = |s: f64| 1.5 * x * s * (2.0 - s);
            (f(b) - f(a)) / (sigma0 * sq)
        })
        .collect();
    let nodes = |y: &[f64]| {
        let mut w = vec![0.0; n];
        for j in 0..m {
            w[j + 1] = w[j] + sigma0 * sq * y[j];
        }
        w
    };
    let (mut lam, mut mu) = (0.0f64, 1.0f64);
    let mut ok = false;
    for _ in 0..10 {
        let (lk, mk) = (lam, mu);
        let out = lbfgs(
            |yv, grad| {
                let w = nodes(yv);
                let mut nodal = vec![0.0; n];
                let mut cost = 0.0;
                for j in 0..m {
                    let wp = (w[j + 1] - w[j]) / dt;
                    let wm = 0.5 * (w[j] + w[j + 1]);
                    let s = model.sigma.value(wm);
                    let s_w = model.sigma.dw(wm);
                    let b = wp / s;
                    cost += 0.5 * dt * b * b;
                    let d_wp = dt * b / s;
                    let d_wm = -dt * b * wp * s_w / (s * s);
                    nodal[j] += -d_wp / dt + 0.5 * d_wm;
                    nodal[j + 1] += d_wp / dt + 0.5 * d_wm;
                }
                let mut c = 0.0;
                let mut cg = vec![0.0; n];
                for i in 0..n {
                    let wt = if i == 0 || i == m { 0.5 * dt } else { dt };
                    let f = forward(w[i]);
                    c += wt * f;
                    cg[i] = wt * f * map.dpsi(w[i]);
                }
                let cr = c / k - 1.0;
                let coef = (lk + mk * cr) / k;
                let mut acc = 0.0;
                for j in (0..m).rev() {
                    acc += nodal[j + 1] + coef * cg[j + 1];
                    grad[j] = sigma0 * sq * acc;
                }
                cost + lk * cr + 0.5 * mk * cr * cr
            },
            y,
            &LbfgsOptions::default(),
        );
        y = out.x;
        let w = nodes(&y);
        let c: f64 = (0..n)
            .map(|i| (if i == 0 || i == m { 0.5 } else { 1.0 }) * dt * forward(w[i]))
            .sum();
        let cr = c / k - 1.0;
        lam += mu * cr;
        if cr.abs() < 1e-11 {
            ok = true;
            break;
        }
        mu *= 10.0;
    }
    let w = nodes(&y);
    let mut cost = 0.0;
    for j in 0..m {
        let b = (w[j + 1] - w[j]) / dt / model.sigma.value(0.5 * (w[j] + w[j + 1]));
        cost += 0.5 * dt * b * b;
    }
    let paths = PathPair {
        t,
        g: w.iter().map(|&wi| model.s0.ln() + map.u(wi)).collect(),
        h: w.iter().map(|&wi| lv0 + wi).collect(),
    };
    Ok((cost, paths, ok))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrPathOptions {
    pub quad: QuadTolerance,
    /// Skip the reduction and solve the one-dimensional path problem directly.
    pub force_direct: bool,
    /// Grid of the direct path solver.
    pub grid: usize,
}

impl Default for CorrPathOptions {
    fn default() -> Self {
        CorrPathOptions {
            quad: QuadTolerance::default(),
            force_direct: false,
            grid: 401,
        }
    }
}

/// Minimal variance-path cost with the price path slaved through `F`.
pub fn rate_corr_path(
    model: &LsvModel,
    k: f64,
    rho_eff: f64,
    opts: &CorrPathOptions,
) -> Result<RateResult> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("strike must be positive, got {k}")));
    }
    if !(rho_eff.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "coupling must lie in [-1, 1], got {rho_eff}"
        )));
    }
    model.validate(None)?;
    let method = if rho_eff.abs() == 1.0 {
        "perfect_corr"
    } else {
        "corr_path"
    };
    let excess = k / model.forward_variance_limit() - 1.0;
    if model.moneyness(k) == crate::model::Moneyness::Atm {
        let mut r = RateResult::simple(method, 0.0);
        r.endpoint_price = Some(model.s0);
        return Ok(r);
    }
    let map = CorrelatedMap::new(model, rho_eff);
    let mut notes = Vec::new();
    if !opts.force_direct {
        let outside = std::cell::Cell::new(false);
        let vol = |y: f64| {
            map.sigma_hat(y).unwrap_or_else(|| {
                outside.set(true);
                f64::NAN
            })
        };
        match asian_rate_general(&vol, excess, opts.quad) {
            Ok(a) if !outside.get() => {
                let y_end = if a.branch == AsianBranch::Below {
                    -a.terminal
                } else {
                    a.terminal
                };
                let endpoint = map.psi_inverse(y_end).map(|w| model.s0 * map.u(w).exp());
                let mut r = RateResult::simple(method, a.value);
                r.endpoint_price = endpoint;
                return Ok(r);
            }
            Ok(_) | Err(_) => {
                notes.push(format!(
                    "price-variance map not invertible on the needed range (w in [{:.3}, {:.3}]); solved the path problem directly",
                    map.invertible_range().0,
                    map.invertible_range().1
                ));
            }
        }
    } else {
        notes.push("direct path solve requested".into());
    }
    let (value, paths, ok) = direct_one_dim(model, &map, k, opts.grid.max(3))?;
    if !ok {
        return Err(Error::NotConverged {
            reason: "direct one-dimensional path solve did not meet the constraint".into(),
            value,
            residual: f64::NAN,
        });
    }
    let mut r = RateResult::simple(method, value);
    r.endpoint_price = paths.g.last().map(|g| g.exp());
    r.diagnostics = RateDiagnostics {
        converged: true,
        notes,
        ..Default::default()
    };
    r.paths = Some(paths);
    Ok(r)
}

/// Exact rate function at perfect correlation `rho = sign`.
pub fn rate_perfect_corr(model: &LsvModel, k: f64, sign: f64) -> Result<RateResult> {
    if sign.abs() != 1.0 || model.rho != sign {
        return Err(Error::Domain(format!(
            "perfect-correlation reduction needs rho = {sign:+}, model has rho = {}",
            model.rho
        )));
    }
    rate_corr_path(model, k, sign, &CorrPathOptions::default())
}

/// Upper bound on the rate function from the price path slaved with
/// coupling `rho`.
pub fn rate_upper_corr_path(model: &LsvModel, k: f64) -> Result<f64> {
    if !(model.rho.abs() < 1.0) {
        return Err(Error::Domain(format!("needs |rho| < 1, got {}", model.rho)));
    }
    rate_corr_path(model, k, model.rho, &CorrPathOptions::default()).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EtaSpec, SigmaSpec};
    use crate::rate_zero::asian_rate_j;

    fn constant_model(rho: f64) -> LsvModel {
        LsvModel {
            eta: EtaSpec::Constant { eta0: 1.0 },
            ..LsvModel::tanh_reference(rho)
        }
    }

    #[test]
    fn f_map_examples() {
        let m = LsvModel::tanh_reference(0.0);
        assert_eq!(f_map_rho(&m, m.v0, 0.7).unwrap(), m.s0);
        assert_eq!(f_map_rho(&m, 0.3, 0.0).unwrap(), m.s0);
        let c = constant_model(1.0);
        let f = f_map_rho(&c, 0.4, 1.0).unwrap();
        assert!((f - 0.1f64.sqrt().exp()).abs() < 1e-9);
        assert!((f - 1.371_943).abs() < 1e-6);
    }

    #[test]
    fn f_map_constant_closed_form() {
        let c = LsvModel {
            eta: EtaSpec::Constant { eta0: 0.8 },
            sigma: SigmaSpec::Constant { sigma0: 1.3 },
            ..LsvModel::tanh_reference(0.0)
        };
        for &(v, r) in &[(0.05, 1.0), (0.2, -1.0), (0.4, 0.3), (0.01, -0.6)] {
            let exact = c.s0 * (2.0 * 0.8 * r * (f64::sqrt(v) - c.v0.sqrt()) / 1.3).exp();
            let got = f_map_rho(&c, v, r).unwrap();
            assert!(
                (got / exact - 1.0).abs() < 1e-9,
                "{v} {r}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn table_matches_primitive_inversion() {
        for rho in [1.0, -1.0, 0.7] {
            let m = LsvModel::tanh_reference(rho);
            let map = CorrelatedMap::new(&m, rho);
            for w in [-2.0, -0.5, 0.3, 1.0, 3.0] {
                let direct = (f_map_rho(&m, m.v0 * f64::exp(w), rho).unwrap() / m.s0).ln();
                assert!(
                    (map.u(w) - direct).abs() < 1e-9,
                    "rho {rho} w {w}: {} vs {direct}",
                    map.u(w)
                );
            }
        }
    }

    #[test]
    fn zero_coupling_is_the_variance_problem() {
        let m = LsvModel::tanh_reference(0.0);
        for k in [0.08, 0.12] {
            let r = rate_corr_path(&m, k, 0.0, &CorrPathOptions::default()).unwrap();
            let j = asian_rate_j(&m.sigma, m.v0, k).unwrap();
            assert!((r.value - j).abs() < 1e-9 * j);
        }
    }

    #[test]
    fn constant_eta_perfect_corr_reduces_to_j() {
        let m = constant_model(1.0);
        let r = rate_perfect_corr(&m, 0.12, 1.0).unwrap();
        let j = asian_rate_j(&m.sigma, m.v0, 0.12).unwrap();
        assert!((r.value - j).abs() < 1e-9 * j);
        assert_eq!(rate_perfect_corr(&m, 0.1, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn wrong_sign_is_rejected() {
        let m = LsvModel::tanh_reference(0.5);
        assert!(rate_perfect_corr(&m, 0.12, 1.0).is_err());
    }

    #[test]
    fn direct_solve_agrees_with_reduction() {
        let m = LsvModel::tanh_reference(1.0);
        for k in [0.09, 0.11] {
            let red = rate_corr_path(&m, k, 1.0, &CorrPathOptions::default()).unwrap();
            let dir = rate_corr_path(
                &m,
                k,
                1.0,
                &CorrPathOptions {
                    force_direct: true,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(
                (red.value / dir.value - 1.0).abs() < 1e-4,
                "{} vs {}",
                red.value,
                dir.value
            );
        }
    }
}
