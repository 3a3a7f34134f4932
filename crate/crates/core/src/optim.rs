//! Limited-memory BFGS with a weak-Wolfe bisection line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the infinity norm of the gradient falls below this.
    pub gtol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 12,
            max_iter: 4000,
            gtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The line search could not make progress (usually floating-point limits).
    pub stalled: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn lbfgs<F: FnMut(&[f64], &mut [f64]) -> f64>(
    mut f: F,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
) -> LbfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];
    let mut stalled = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        if inf_norm(&g) <= opts.gtol {
            break;
        }
        // Two-loop recursion.
        d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
        for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha[k] = a;
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for (k, (s, y, rho)) in hist.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut()
                .zip(s)
                .for_each(|(di, si)| *di += (alpha[k] - b) * si);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }
        let first = hist.is_empty();
        let mut t = if first {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let (c1, c2) = (1e-4, 0.9);
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            x_new
                .iter_mut()
                .zip(&x)
                .zip(&d)
                .for_each(|((xn, xi), di)| *xn = xi + t * di);
            f_new = f(&x_new, &mut g_new);
            if !f_new.is_finite() || f_new > fx + c1 * t * slope {
                hi = t;
            } else if dot(&g_new, &d) < c2 * slope {
                lo = t;
            } else {
                accepted = true;
                break;
            }
            t = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * lo
            };
        }
        if !accepted {
            // Fall back to the best Armijo point found, if any.
            if lo > 0.0 {
                t = lo;
                x_new
                    .iter_mut()
                    .zip(&x)
                    .zip(&d)
                    .for_each(|((xn, xi), di)| *xn = xi + t * di);
                f_new = f(&x_new, &mut g_new);
            } else {
                stalled = true;
                break;
            }
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        let f_old = fx;
        fx = f_new;
        iter += 1;
        if sy > 1e-300 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if f_old - fx <= 0.0 && inf_norm(&g) > opts.gtol {
            stalled = true;
            break;
        }
    }
    let grad_norm = inf_norm(&g);
    LbfgsOutcome {
        x,
        f: fx,
        grad_norm,
        iterations: iter,
        converged: grad_norm <= opts.gtol,
        stalled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let out = lbfgs(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            &LbfgsOptions::default(),
        );
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales: Vec<f64> = (0..50).map(|i| 10f64.powf(i as f64 / 49.0 * 4.0)).collect();
        let out = lbfgs(
            |x, g| {
                let mut f = 0.0;
                for i in 0..x.len() {
                    g[i] = scales[i] * (x[i] - 1.0);
                    f += 0.5 * scales[i] * (x[i] - 1.0).powi(2);
                }
                f
            },
            vec![0.0; 50],
            &LbfgsOptions::default(),
        );
        assert!(out.converged);
        assert!(out.x.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}
