//! Direct transcription of the correlated variational problem: minimize the
//! discretized action over piecewise-linear paths subject to the
//! average-variance constraint, by an augmented Lagrangian around L-BFGS.
//!
//! The unknowns are the path increments scaled by `sqrt(dt)` and by the
//! local volatilities `eta0 sqrt(V0)` and `sigma0`, which makes the
//! Hessian of the action close to a well-conditioned block identity.

use crate::atm::ExpansionPaths;
use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::optim::{lbfgs, LbfgsOptions};
use crate::paths::{uniform_grid, PathPair};
use crate::rate_general::functional::{euler_lagrange_residual, Discrete};
use crate::rate_result::{RateDiagnostics, RateResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    pub grid: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Target for the relative constraint residual and the scaled gradient.
    pub tol: f64,
    pub starts: usize,
    /// Report `(4 I_N - I_{N/2}) / 3` instead of the finest-grid value.
    pub richardson: bool,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            grid: 201,
            max_outer: 8,
            max_inner: 4000,
            tol: 1e-10,
            starts: 3,
            richardson: false,
        }
    }
}

struct Transcription<'a> {
    model: &'a LsvModel,
    k: f64,
    t: Vec<f64>,
    sq_dt: Vec<f64>,
    scale_g: f64,
    scale_h: f64,
    g0: f64,
    h0: f64,
}

struct StartOutcome {
    paths: PathPair,
    value: f64,
    g_cost: f64,
    h_cost: f64,
    multiplier: f64,
    residual: f64,
    grad_norm: f64,
    evaluations: usize,
    converged: bool,
}

impl<'a> Transcription<'a> {
    fn new(model: &'a LsvModel, k: f64, n: usize) -> Self {
        let t = uniform_grid(n);
        let sq_dt = t.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
        let (eta0, _, _) = model.eta_log_coeffs();
        let (sigma0, _, _) = model.sigma_log_coeffs();
        Transcription {
            model,
            k,
            t,
            sq_dt,
            scale_g: eta0 * model.v0.sqrt(),
            scale_h: sigma0,
            g0: model.s0.ln(),
            h0: model.v0.ln(),
        }
    }

    fn m(&self) -> usize {
        self.t.len() - 1
    }

    fn to_nodes(&self, y: &[f64], g: &mut [f64], h: &mut [f64]) {
        let m = self.m();
        g[0] = self.g0;
        h[0] = self.h0;
        for j in 0..m {
            g[j + 1] = g[j] + self.scale_g * self.sq_dt[j] * y[j];
            h[j + 1] = h[j] + self.scale_h * self.sq_dt[j] * y[m + j];
        }
    }

    fn pack_nodes(&self, g: &[f64], h: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; 2 * m];
        for j in 0..m {
            y[j] = (g[j + 1] - g[j]) / (self.scale_g * self.sq_dt[j]);
            y[m + j] = (h[j + 1] - h[j]) / (self.scale_h * self.sq_dt[j]);
        }
        y
    }

    /// Chain rule from node gradients to increment gradients (suffix sums).
    fn pull_back(&self, ng: &[f64], nh: &[f64], out: &mut [f64]) {
        let m = self.m();
        let (mut sg, mut sh) = (0.0, 0.0);
        for j in (0..m).rev() {
            sg += ng[j + 1];
            sh += nh[j + 1];
            out[j] = self.scale_g * self.sq_dt[j] * sg;
            out[m + j] = self.scale_h * self.sq_dt[j] * sh;
        }
    }

    fn solve(&self, init: &PathPair, opts: &NumericOptions) -> StartOutcome {
        let n = self.t.len();
        let m = self.m();
        let disc = Discrete::new(self.model, &self.t);
        let mut y = self.pack_nodes(&init.g, &init.h);
        let (mut lam, mut mu) = (0.0f64, 1.0f64);
        let mut evaluations = 0usize;
        let mut bufs = (
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
        );
        let mut grad_norm = f64::INFINITY;
        let mut converged = false;
        let ctol = opts.tol;
        for _ in 0..opts.max_outer {
            let (lam_k, mu_k) = (lam, mu);
            let out = lbfgs(
                |yv, grad| {
                    evaluations += 1;
                    let (g, h, ag, ah, cg, ch) = &mut bufs;
                    self.to_nodes(yv, g, h);
                    let (gc, hc) = disc.action(g, h, Some((ag, ah)));
                    let c = disc.constraint(g, h, Some((cg, ch))) / self.k - 1.0;
                    let w = (lam_k + mu_k * c) / self.k;
                    for i in 0..n {
                        ag[i] += w * cg[i];
                        ah[i] += w * ch[i];
                    }
                    self.pull_back(ag, ah, grad);
                    gc + hc + lam_k * c + 0.5 * mu_k * c * c
                },
                y,
                &LbfgsOptions {
                    max_iter: opts.max_inner,
                    gtol: opts.tol * 1e-2,
                    ..Default::default()
                },
            );
            y = out.x;
            let (g, h, ..) = &mut bufs;
            self.to_nodes(&y, g, h);
            let c = disc.constraint(g, h, None) / self.k - 1.0;
            lam += mu * c;
            grad_norm = out.grad_norm;
            if c.abs() <= ctol && (out.converged || out.stalled) {
                converged = true;
                break;
            }
            mu *= 10.0;
        }
        // KKT gradient of the plain Lagrangian at the final multiplier.
        let (g, h, ag, ah, cg, ch) = &mut bufs;
        self.to_nodes(&y, g, h);
        let (g_cost, h_cost) = disc.action(g, h, Some((ag, ah)));
        let c = disc.constraint(g, h, Some((cg, ch)));
        for i in 0..n {
            ag[i] += lam / self.k * cg[i];
            ah[i] += lam / self.k * ch[i];
        }
        let mut kkt = vec![0.0; 2 * m];
        self.pull_back(ag, ah, &mut kkt);
        let kkt_norm = kkt.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let residual = (c / self.k - 1.0).abs();
        let value = g_cost + h_cost;
        // Gradient small relative to the size of the problem.
        let kkt_ok = kkt_norm <= 1e-6 * value.sqrt().max(1e-12) + opts.tol;
        StartOutcome {
            paths: PathPair {
                t: self.t.clone(),
                g: g.clone(),
                h: h.clone(),
            },
            value,
            g_cost,
            h_cost,
            multiplier: lam / self.k,
            residual,
            grad_norm: grad_norm.min(kkt_norm),
            evaluations,
            converged: converged && residual <= 10.0 * ctol && kkt_ok,
        }
    }
}

fn initial_paths(model: &LsvModel, x: f64, n: usize, starts: usize) -> Result<Vec<PathPair>> {
    let exp = ExpansionPaths::of(model)?;
    let (ls0, lv0) = (model.s0.ln(), model.v0.ln());
    let second = exp.paths(model, x, 2, n);
    let mut out = vec![second.clone()];
    if starts > 1 {
        out.push(exp.paths(model, x, 1, n));
    }
    for k in 2..starts {
        let f = 1.0 + 0.15 * (k as f64 - 1.0) * if k % 2 == 0 { -1.0 } else { 1.0 };
        out.push(PathPair {
            t: second.t.clone(),
            g: second.g.iter().map(|g| ls0 + f * (g - ls0)).collect(),
            h: second
                .h
                .iter()
                .map(|h| lv0 + (2.0 - f) * (h - lv0))
                .collect(),
        });
    }
    Ok(out)
}

fn solve_on_grid(
    model: &LsvModel,
    k: f64,
    opts: &NumericOptions,
) -> Result<(StartOutcome, Vec<String>)> {
    let n = opts.grid;
    let x = model.log_moneyness(k);
    let inits = initial_paths(model, x, n, opts.starts.max(1))?;
    let tr = Transcription::new(model, k, n);
    let outcomes: Vec<StartOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = inits
            .iter()
            .map(|p| s.spawn(|| tr.solve(p, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("start panicked"))
            .collect()
    });
    let mut notes = Vec::new();
    let spread = outcomes
        .iter()
        .filter(|o| o.converged)
        .map(|o| o.value)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if spread.1 - spread.0 > 1e-6 * spread.1.abs().max(1e-300) {
        notes.push(format!(
            "starts disagree: values span [{:.6e}, {:.6e}]",
            spread.0, spread.1
        ));
    }
    // Lowest value among converged starts, ties to the lowest index.
    let pick = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.converged)
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    match pick {
        Some(i) => Ok((outcomes.into_iter().nth(i).expect("index in range"), notes)),
        None => {
            let best = outcomes
                .iter()
                .min_by(|a, b| a.residual.total_cmp(&b.residual))
                .expect("at least one start");
            Err(Error::NotConverged {
                reason: format!(
                    "no start converged (best residual {:.3e}, gradient {:.3e})",
                    best.residual, best.grad_norm
                ),
                value: best.value,
                residual: best.residual,
            })
        }
    }
}

/// Rate function for `|rho| < 1` by direct transcription.
pub fn rate_numeric(model: &LsvModel, k: f64, opts: &NumericOptions) -> Result<RateResult> {
    if !(model.rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "direct transcription needs |rho| < 1, got {}; use the perfect-correlation reduction",
            model.rho
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("strike must be positive, got {k}")));
    }
    if opts.grid < 3 {
        return Err(Error::Domain("grid needs at least 3 nodes".into()));
    }
    model.validate(None)?;
    let (fine, mut notes) = solve_on_grid(model, k, opts)?;
    let mut value = fine.value;
    if opts.richardson {
        if opts.grid.is_multiple_of(2) {
            return Err(Error::Domain(
                "Richardson extrapolation needs an odd grid size".into(),
            ));
        }
        let coarse_opts = NumericOptions {
            grid: (opts.grid - 1) / 2 + 1,
            ..*opts
        };
        let (coarse, _) = solve_on_grid(model, k, &coarse_opts)?;
        value = (4.0 * fine.value - coarse.value) / 3.0;
        notes.push(format!(
            "Richardson extrapolation from grids {} and {}",
            opts.grid, coarse_opts.grid
        ));
    }
    let el = euler_lagrange_residual(model, &fine.paths, fine.multiplier).ok();
    let endpoint = fine.paths.g.last().map(|g| g.exp());
    Ok(RateResult {
        value,
        method: "numeric".into(),
        z_star: None,
        endpoint_price: endpoint,
        lagrange: Some(fine.multiplier),
        g_cost: fine.g_cost,
        h_cost: fine.h_cost,
        diagnostics: RateDiagnostics {
            converged: fine.converged,
            evaluations: fine.evaluations,
            boundary: false,
            constraint_residual: Some(fine.residual),
            gradient_norm: Some(fine.grad_norm),
            el_residual: el,
            notes,
        },
        paths: Some(fine.paths),
    })
}
