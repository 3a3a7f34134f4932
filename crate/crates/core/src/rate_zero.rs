//! Rate function for uncorrelated price and variance.
//!
//! The problem splits into an Asian-type problem for the variance path with
//! time-average `z` and a local-volatility problem for the price path in a
//! time change. The value is minimized over `z` in the interval between the
//! pure-variance endpoint `z = K / eta0^2` and `z = V0`, both included.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EtaSpec, LsvModel, Moneyness, SigmaSpec};
use crate::paths::{uniform_grid, PathPair};
use crate::quad::{
    find_root, integrate_sqrt_singular_gap, minimize_scalar_with, Bracket, MinimizeOptions,
    QuadTolerance, Singularity,
};
use crate::rate_result::{RateDiagnostics, RateResult};

/// Which side of `V0` the average variance lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsianBranch {
    Above,
    Below,
    Atm,
}

/// Minimal cost of a variance path started at `V0` with prescribed time-average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsianRate {
    pub value: f64,
    pub branch: AsianBranch,
    /// Terminal log-deviation `|ln(V(1)/V0)|` of the optimal path.
    pub terminal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroRhoOptions {
    /// Absolute tolerance of the search in `ln z`.
    pub z_tol: f64,
    pub quad: QuadTolerance,
}

impl Default for ZeroRhoOptions {
    fn default() -> Self {
        ZeroRhoOptions {
            z_tol: 1e-9,
            quad: QuadTolerance::default(),
        }
    }
}

fn sinhc_minus_one(b: f64) -> f64 {
    if b.abs() < 1e-2 {
        let b2 = b * b;
        b2 / 6.0 * (1.0 + b2 / 20.0 * (1.0 + b2 / 42.0))
    } else {
        b.sinh() / b - 1.0
    }
}

fn sinc_minus_one(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x - 1.0
    }
}

/// Closed form for constant vol-of-vol `sigma0` at average variance `z`.
pub fn asian_rate_j_const(sigma0: f64, v0: f64, z: f64) -> Result<AsianRate> {
    if !(v0 > 0.0 && z > 0.0) {
        return Err(Error::Domain(format!(
            "need V0 > 0 and z > 0, got V0 = {v0}, z = {z}"
        )));
    }
    asian_rate_constant(sigma0, z / v0 - 1.0)
}

/// Closed form for constant vol-of-vol `sigma0`; `excess = z/V0 - 1`.
pub fn asian_rate_constant(sigma0: f64, excess: f64) -> Result<AsianRate> {
    if !(sigma0 > 0.0) {
        return Err(Error::Domain(format!(
            "sigma0 must be positive, got {sigma0}"
        )));
    }
    if !(excess > -1.0) || !excess.is_finite() {
        return Err(Error::Domain(format!(
            "average variance must be positive (z/V0 - 1 = {excess})"
        )));
    }
    let s2 = sigma0 * sigma0;
    if excess == 0.0 {
        return Ok(AsianRate {
            value: 0.0,
            branch: AsianBranch::Atm,
            terminal: 0.0,
        });
    }
    if excess > 0.0 {
        let mut hi = (6.0 * excess).sqrt().max(1e-300) * 2.0;
        while sinhc_minus_one(hi) < excess {
            hi *= 2.0;
        }
        let b = find_root(|b| sinhc_minus_one(b) - excess, Bracket::new(0.0, hi)?, 0.0)?;
        let value = if b < 1e-2 {
            let b4 = b.powi(4);
            b4 / 24.0 - b4 * b * b / 240.0 + 17.0 * b4 * b4 / 40320.0
        } else {
            0.5 * b * b - b * (0.5 * b).tanh()
        } / s2;
        // The optimal path ends at ln(V1/V0) = 2 ln cosh(b/2).
        let terminal = 2.0 * (0.5 * b).cosh().ln();
        Ok(AsianRate {
            value,
            branch: AsianBranch::Above,
            terminal,
        })
    } else {
        let x = find_root(
            |x| sinc_minus_one(2.0 * x) - excess,
            Bracket::new(0.0, std::f64::consts::FRAC_PI_2)?,
            0.0,
        )?;
        let value = if x < 1e-2 {
            let x4 = x.powi(4);
            2.0 * x4 / 3.0 + 4.0 * x4 * x * x / 15.0 + 34.0 * x4 * x4 / 315.0
        } else {
            2.0 * x * (x.tan() - x)
        } / s2;
        let terminal = -2.0 * x.cos().ln();
        Ok(AsianRate {
            value,
            branch: AsianBranch::Below,
            terminal,
        })
    }
}

/// The pair of integrals defining the variance-path problem at terminal
/// log-deviation `x > 0`: `(int dy / (vol sqrt(D)), int sqrt(D) / vol dy)`,
/// with `D = e^x - e^y` above and `D = e^-y - e^-x` below (`vol` at `-y`).
fn asian_integrals(
    vol: &dyn Fn(f64) -> f64,
    x: f64,
    above: bool,
    tol: QuadTolerance,
) -> Result<(f64, f64)> {
    let d = |y: f64, gap: f64| {
        if above {
            y.exp() * gap.exp_m1()
        } else {
            (-x).exp() * gap.exp_m1()
        }
    };
    let v = |y: f64| if above { vol(y) } else { vol(-y) };
    let f = integrate_sqrt_singular_gap(
        |y, gap| 1.0 / (v(y) * d(y, gap).sqrt()),
        0.0,
        x,
        Singularity::Upper,
        tol,
    )?;
    let g = integrate_sqrt_singular_gap(
        |y, gap| d(y, gap).sqrt() / v(y),
        0.0,
        x,
        Singularity::Upper,
        tol,
    )?;
    Ok((f, g))
}

/// Variance-path cost for a general vol-of-vol, given as a function of the
/// log-deviation `ln(V/V0)`; `excess = z/V0 - 1`.
pub fn asian_rate_general(
    vol: &dyn Fn(f64) -> f64,
    excess: f64,
    tol: QuadTolerance,
) -> Result<AsianRate> {
    if !(excess > -1.0) || !excess.is_finite() {
        return Err(Error::Domain(format!(
            "average variance must be positive (z/V0 - 1 = {excess})"
        )));
    }
    if excess == 0.0 {
        return Ok(AsianRate {
            value: 0.0,
            branch: AsianBranch::Atm,
            terminal: 0.0,
        });
    }
    let above = excess > 0.0;
    let phi = |x: f64| -> Result<f64> {
        if x == 0.0 {
            return Ok(-excess.abs());
        }
        let (f, g) = asian_integrals(vol, x, above, tol)?;
        Ok(if above {
            x.exp_m1() - excess - g / f
        } else {
            excess - (-x).exp_m1() - g / f
        })
    };
    let mut hi = (3.0 * excess.abs()).max(1e-300);
    let cap = if above { 50.0 } else { 60.0 };
    loop {
        if phi(hi)? > 0.0 {
            break;
        }
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Infeasible(format!(
                "no terminal variance matches z/V0 - 1 = {excess}"
            )));
        }
    }
    let mut failure = None;
    let x = find_root(
        |x| match phi(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        Bracket::new(0.0, hi)?,
        0.0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let x = x?;
    let (f, g) = asian_integrals(vol, x, above, tol)?;
    Ok(AsianRate {
        value: 0.5 * f * g,
        branch: if above {
            AsianBranch::Above
        } else {
            AsianBranch::Below
        },
        terminal: x,
    })
}

/// `J(V0, z)`: minimal variance-path cost for time-average `z`.
pub fn asian_rate_j(sigma: &SigmaSpec, v0: f64, z: f64) -> Result<f64> {
    asian_rate_detail(sigma, v0, z, QuadTolerance::default()).map(|a| a.value)
}

pub fn asian_rate_detail(
    sigma: &SigmaSpec,
    v0: f64,
    z: f64,
    tol: QuadTolerance,
) -> Result<AsianRate> {
    if !(v0 > 0.0 && z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "need V0 > 0 and z > 0, got V0 = {v0}, z = {z}"
        )));
    }
    let excess = (z - v0) / v0;
    match sigma {
        SigmaSpec::Constant { sigma0 } => asian_rate_constant(*sigma0, excess),
        _ if sigma.is_constant() => asian_rate_constant(sigma.value(0.0), excess),
        _ => asian_rate_general(&|w| sigma.value(w), excess, tol),
    }
}

/// Side of the at-the-money point and the direction of the price path.
#[derive(Debug, Clone, Copy)]
struct PriceLeg<'a> {
    eta: &'a EtaSpec,
    /// `+1` for a call (terminal eta above eta0), `-1` for a put.
    side: f64,
    /// Sign of the terminal log-price.
    dir: f64,
    eta0: f64,
    tol: QuadTolerance,
}

impl<'a> PriceLeg<'a> {
    fn new(eta: &'a EtaSpec, moneyness: Moneyness, tol: QuadTolerance) -> Result<Self> {
        let (eta0, eta1, _) = eta.log_coeffs();
        let slope = if eta1 != 0.0 { eta1 } else { eta.du(0.0) };
        if slope == 0.0 {
            return Err(Error::DegenerateEta("eta is flat at the spot".into()));
        }
        let side = if moneyness == Moneyness::OtmCall {
            1.0
        } else {
            -1.0
        };
        Ok(PriceLeg {
            eta,
            side,
            dir: side * slope.signum(),
            eta0,
            tol,
        })
    }

    /// `side * (eta^2(U) - eta^2(u))` with `U - u = dir * gap`.
    fn spread(&self, big_u: f64, gap: f64) -> f64 {
        let d = self.eta.diff_step(big_u, self.dir * gap);
        let s = self.eta.value(big_u) + self.eta.value(big_u - self.dir * gap);
        self.side * d * s
    }

    /// `(int_0^U du / (eta sqrt(spread)), int_0^U eta du / sqrt(spread))`, taken
    /// as positive magnitudes.
    fn integrals(&self, a: f64) -> Result<(f64, f64)> {
        let big_u = self.dir * a;
        let n = integrate_sqrt_singular_gap(
            |y, gap| {
                let u = self.dir * y;
                1.0 / (self.eta.value(u) * self.spread(big_u, gap).sqrt())
            },
            0.0,
            a,
            Singularity::Upper,
            self.tol,
        )?;
        let d = integrate_sqrt_singular_gap(
            |y, gap| self.eta.value(self.dir * y) / self.spread(big_u, gap).sqrt(),
            0.0,
            a,
            Singularity::Upper,
            self.tol,
        )?;
        Ok((n, d))
    }

    fn ratio(&self, a: f64) -> Result<f64> {
        if a == 0.0 {
            return Ok(1.0 / (self.eta0 * self.eta0));
        }
        let (n, d) = self.integrals(a)?;
        Ok(n / d)
    }

    /// Magnitude `|U|` of the terminal log-price solving `ratio(U) = target`.
    fn solve(&self, target: f64) -> Result<f64> {
        let r0 = 1.0 / (self.eta0 * self.eta0);
        let gap = self.side * (r0 - target);
        if gap.abs() <= 1e-14 * r0 {
            return Ok(0.0);
        }
        if gap < 0.0 {
            return Err(Error::Infeasible(format!(
                "ratio {target} is on the wrong side of 1/eta0^2 = {r0}"
            )));
        }
        let f = |a: f64| self.ratio(a).map(|r| self.side * (r - target));
        let mut hi = 0.25;
        loop {
            if f(hi)? < 0.0 {
                break;
            }
            hi *= 2.0;
            if hi > 64.0 {
                return Err(Error::Infeasible(format!(
                    "no terminal price reaches ratio {target}"
                )));
            }
        }
        let mut failure = None;
        let root = find_root(
            |a| {
                f(a).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    f64::NAN
                })
            },
            Bracket::new(0.0, hi)?,
            0.0,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        root
    }

    /// Price-path cost at average variance `z`; returns `(cost, |U|)`.
    fn cost(&self, z: f64, k: f64) -> Result<(f64, f64)> {
        let a = self.solve(z / k)?;
        if a == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (_, d) = self.integrals(a)?;
        let e = self.eta.value(self.dir * a);
        let cost = d * d / (2.0 * k * k) * self.side * (e * e * z - k);
        Ok((cost, a))
    }
}

/// Terminal price `G` of the optimal uncorrelated price path reaching average
/// variance `z` for strike `k`. `side` must be [`Moneyness::OtmCall`] or
/// [`Moneyness::OtmPut`].
pub fn solve_g_endpoint(model: &LsvModel, z: f64, k: f64, side: Moneyness) -> Result<f64> {
    if !(z > 0.0 && k > 0.0 && z.is_finite() && k.is_finite()) {
        return Err(Error::Domain(format!(
            "need z > 0 and K > 0, got z = {z}, K = {k}"
        )));
    }
    if side == Moneyness::Atm {
        return Err(Error::Domain(
            "endpoint side must be a call or a put".into(),
        ));
    }
    if model.eta.is_constant() {
        return Err(Error::DegenerateEta(
            "constant eta has no price-path leg".into(),
        ));
    }
    let leg = PriceLeg::new(&model.eta, side, ZeroRhoOptions::default().quad)?;
    let a = leg.solve(z / k)?;
    Ok(model.s0 * (leg.dir * a).exp())
}

fn check_strike(model: &LsvModel, k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("strike must be positive, got {k}")));
    }
    model.validate(None).map(|_| ())
}

/// Rate function for `rho = 0` by one-dimensional minimization over the
/// average variance `z`.
pub fn rate_zero_rho(model: &LsvModel, k: f64, opts: &ZeroRhoOptions) -> Result<RateResult> {
    if model.rho != 0.0 {
        return Err(Error::Domain(format!(
            "zero-correlation closed form needs rho = 0, got {}; use a general-correlation method",
            model.rho
        )));
    }
    check_strike(model, k)?;
    let moneyness = model.moneyness(k);
    let (eta0, _, _) = model.eta_log_coeffs();
    let z_h = k / (eta0 * eta0);
    let method = "closed";
    if moneyness == Moneyness::Atm {
        let mut r = RateResult::simple(method, 0.0);
        r.z_star = Some(model.v0);
        r.endpoint_price = Some(model.s0);
        return Ok(r);
    }
    let j = |z: f64| asian_rate_detail(&model.sigma, model.v0, z, opts.quad).map(|a| a.value);
    if model.eta.is_constant() {
        let v = j(z_h)?;
        let mut r = RateResult::simple(method, v);
        r.z_star = Some(z_h);
        r.endpoint_price = Some(model.s0);
        r.diagnostics
            .notes
            .push("constant eta: pure variance-path problem".into());
        return Ok(r);
    }

    let leg = PriceLeg::new(&model.eta, moneyness, opts.quad)?;
    let (eta_lo, eta_hi) = model.eta.bounds();
    let (z_a, z_b) = if moneyness == Moneyness::OtmCall {
        (model.v0.max(k / (eta_hi * eta_hi)), z_h)
    } else {
        (z_h, model.v0.min(k / (eta_lo * eta_lo)))
    };
    let mut evals = 0usize;
    let mut hard_error = None;
    let mut objective = |lz: f64| -> f64 {
        evals += 1;
        let z = lz.exp();
        match (leg.cost(z, k), j(z)) {
            (Ok((c, _)), Ok(jv)) => c + jv,
            (Err(Error::Infeasible(_)), _) | (_, Err(Error::Infeasible(_))) => f64::INFINITY,
            (Err(e), _) | (_, Err(e)) => {
                hard_error.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (la, lb) = (z_a.ln(), z_b.ln());
    let best = if lb - la > opts.z_tol {
        minimize_scalar_with(
            &mut objective,
            Bracket::new(la, lb)?,
            &MinimizeOptions::fixed(opts.z_tol),
        )?
    } else {
        let v = objective(lb);
        crate::quad::Minimum {
            argmin: lb,
            value: v,
            boundary: true,
            evaluations: 1,
        }
    };
    if let Some(e) = hard_error {
        return Err(e);
    }
    let z = best.argmin.exp();
    let (g_cost, a) = leg.cost(z, k)?;
    let h_cost = j(z)?;
    Ok(RateResult {
        value: g_cost + h_cost,
        method: method.into(),
        z_star: Some(z),
        endpoint_price: Some(model.s0 * (leg.dir * a).exp()),
        lagrange: None,
        g_cost,
        h_cost,
        diagnostics: RateDiagnostics {
            converged: true,
            evaluations: evals,
            boundary: best.boundary,
            ..Default::default()
        },
        paths: None,
    })
}

/// For a density `q(y, gap)` on `[0, x]` with an inverse-square-root
/// singularity at `y = x` (`gap = x - y`), returns for each `t` the point `y`
/// where the normalized cumulative integral equals `t`.
pub(crate) fn inverse_time_map(q: &dyn Fn(f64, f64) -> f64, x: f64, ts: &[f64]) -> Vec<f64> {
    if x == 0.0 {
        return vec![0.0; ts.len()];
    }
    const CELLS: usize = 2000;
    let smax = x.sqrt();
    let ds = smax / CELLS as f64;
    // In s = sqrt(x - y) the integrand 2 s q is smooth.
    let dens = |s: f64| {
        let s = s.max(1e-12 * smax);
        let gap = s * s;
        2.0 * s * q(x - gap, gap)
    };
    let cell = |a: f64, b: f64| {
        crate::quad::integrate(
            dens,
            a,
            b,
            QuadTolerance {
                rel: 1e-13,
                abs: 0.0,
                max_subdivisions: 1,
            },
        )
        .or_else(|e| match e {
            Error::QuadAccuracy { estimate, .. } => Ok(estimate),
            e => Err(e),
        })
        .unwrap_or(f64::NAN)
    };
    // tail[j] = integral over s in [s_j, smax], i.e. y in [0, x - s_j^2].
    let mut tail = vec![0.0; CELLS + 1];
    for j in (0..CELLS).rev() {
        tail[j] = tail[j + 1] + cell(j as f64 * ds, (j + 1) as f64 * ds);
    }
    let total = tail[0];
    ts.iter()
        .map(|&t| {
            let target = (t.clamp(0.0, 1.0)) * total;
            if target >= total {
                return x;
            }
            if target <= 0.0 {
                return 0.0;
            }
            // tail is decreasing in j; find the cell with tail[j] >= target > tail[j+1].
            let j = tail
                .partition_point(|&v| v >= target)
                .saturating_sub(1)
                .min(CELLS - 1);
            let (s0, s1) = (j as f64 * ds, (j + 1) as f64 * ds);
            let w = (tail[j] - target) / (tail[j] - tail[j + 1]);
            let mut s = s0 + w * ds;
            for _ in 0..3 {
                let resid = tail[j + 1] + cell(s, s1) - target;
                s = (s + resid / dens(s)).clamp(s0, s1);
            }
            x - s * s
        })
        .collect()
}

/// Optimal `(g, h)` paths for `rho = 0` on a uniform grid of `n` nodes.
pub fn optimal_paths_zero_rho(model: &LsvModel, k: f64, n: usize) -> Result<PathPair> {
    let opts = ZeroRhoOptions::default();
    let r = rate_zero_rho(model, k, &opts)?;
    let (ls0, lv0) = (model.s0.ln(), model.v0.ln());
    let n = n.max(2);
    if r.value == 0.0 {
        return Ok(PathPair::constant(n, ls0, lv0));
    }
    let z = r.z_star.expect("closed form reports z");
    let detail = asian_rate_detail(&model.sigma, model.v0, z, opts.quad)?;
    let x = detail.terminal;
    let above = detail.branch == AsianBranch::Above;
    let vol = |y: f64| model.sigma.value(if above { y } else { -y });
    let q_h = |y: f64, gap: f64| {
        let d = if above {
            y.exp() * gap.exp_m1()
        } else {
            (-x).exp() * gap.exp_m1()
        };
        1.0 / (vol(y) * d.sqrt())
    };
    let sign_h = if above { 1.0 } else { -1.0 };

    // Variance path on a fine grid, then the business-time clock of the price path.
    let fine_n = 8 * (n - 1) + 1;
    let fine_t = uniform_grid(fine_n);
    let y_h = inverse_time_map(&q_h, x, &fine_t);
    let h_fine: Vec<f64> = y_h.iter().map(|y| lv0 + sign_h * y).collect();
    let mut clock = vec![0.0; fine_n];
    for i in 1..fine_n {
        let dt = fine_t[i] - fine_t[i - 1];
        clock[i] = clock[i - 1] + 0.5 * dt * (h_fine[i].exp() + h_fine[i - 1].exp());
    }
    let total = clock[fine_n - 1];
    let tau: Vec<f64> = clock.iter().map(|c| c / total).collect();

    let g_fine = if model.eta.is_constant() {
        vec![ls0; fine_n]
    } else {
        let leg = PriceLeg::new(&model.eta, model.moneyness(k), opts.quad)?;
        let a = (r.endpoint_price.expect("closed form reports the endpoint") / model.s0)
            .ln()
            .abs();
        let big_u = leg.dir * a;
        let q_g =
            |y: f64, gap: f64| 1.0 / (model.eta.value(leg.dir * y) * leg.spread(big_u, gap).sqrt());
        inverse_time_map(&q_g, a, &tau)
            .into_iter()
            .map(|y| ls0 + leg.dir * y)
            .collect()
    };
    let stride = 8;
    Ok(PathPair {
        t: uniform_grid(n),
        g: (0..n).map(|i| g_fine[i * stride]).collect(),
        h: (0..n).map(|i| h_fine[i * stride]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sigma_examples() {
        let j = asian_rate_j(&SigmaSpec::Constant { sigma0: 2.0 }, 0.1, 0.1).unwrap();
        assert_eq!(j, 0.0);
        let above = asian_rate_constant(2.0, 0.2).unwrap();
        // Bisection oracle for sinh(b)/b = 1.2, then the closed form.
        assert!((above.value - 0.012_031_580_049_66).abs() < 1e-12);
        let unit = asian_rate_constant(1.0, 1.0).unwrap();
        assert!((unit.value - 0.636_367_494_524_80).abs() < 1e-11);
        let below = asian_rate_constant(2.0, -0.2).unwrap();
        assert_eq!(below.branch, AsianBranch::Below);
        assert!(below.value > 0.0);
    }

    #[test]
    fn series_branches_are_continuous() {
        for &e in &[1e-4, 1e-5, -1e-4, -1e-5] {
            let near = asian_rate_constant(1.0, e).unwrap().value;
            assert!((near / (1.5 * e * e) - 1.0).abs() < 1e-3, "{e}: {near}");
        }
        // Across the switch between series and closed form.
        let f = |e: f64| asian_rate_constant(1.0, e).unwrap().value;
        for &e in &[1.66e-5, 1.67e-5, -6.6e-5, -6.7e-5] {
            let (a, b) = (f(e * (1.0 - 1e-6)), f(e * (1.0 + 1e-6)));
            assert!((a / b - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn general_route_matches_closed_form() {
        let tol = QuadTolerance::default();
        for &e in &[0.2, 0.5, 2.0, 1e-3, -0.2, -0.5, -0.9, -1e-3] {
            let closed = asian_rate_constant(1.7, e).unwrap();
            let general = asian_rate_general(&|_| 1.7, e, tol).unwrap();
            assert!(
                (closed.value - general.value).abs() <= 1e-9 * closed.value,
                "{e}: {} vs {}",
                closed.value,
                general.value
            );
            assert!((closed.terminal - general.terminal).abs() < 1e-8, "{e}");
        }
    }

    #[test]
    fn price_leg_direction_follows_eta_slope() {
        let m = LsvModel::tanh_reference(0.0);
        let r = rate_zero_rho(&m, 0.12, &ZeroRhoOptions::default()).unwrap();
        assert!(r.endpoint_price.unwrap() < m.s0);
        let r = rate_zero_rho(&m, 0.08, &ZeroRhoOptions::default()).unwrap();
        assert!(r.endpoint_price.unwrap() > m.s0);
    }

    #[test]
    fn nonzero_rho_is_rejected() {
        let m = LsvModel::tanh_reference(0.3);
        assert!(matches!(
            rate_zero_rho(&m, 0.12, &ZeroRhoOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_time_map_on_arcsine_density() {
        // q = 1/sqrt(x - y) on [0, 1]: cumulative 2(1 - sqrt(1 - y)) / 2.
        let ts = [0.0, 0.1, 0.5, 0.9, 1.0];
        let ys = inverse_time_map(&|_, gap| 1.0 / gap.sqrt(), 1.0, &ts);
        for (t, y) in ts.iter().zip(ys) {
            let exact = 1.0 - (1.0 - t) * (1.0 - t);
            assert!((y - exact).abs() < 1e-12, "{t}: {y} vs {exact}");
        }
    }
}
