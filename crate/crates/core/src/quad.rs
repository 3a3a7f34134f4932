//! One-dimensional numerics: adaptive Gauss-Kronrod quadrature with
//! square-root endpoint singularities, bracketed root finding (Brent) and
//! bracketed scalar minimization (golden section).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        QuadTolerance {
            rel: 1e-11,
            abs: 1e-14,
            max_subdivisions: 400,
        }
    }
}

/// Which endpoint of `[a, b]` carries an inverse-square-root (or square-root)
/// singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singularity {
    None,
    Lower,
    Upper,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive G7-K15 quadrature of a smooth integrand over `[a, b]`.
/// Returns the estimate and its error bound.
pub fn integrate_with_error<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: QuadTolerance,
) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite: [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(&mut f, a, b);
    if !v.is_finite() {
        return Err(Error::Degenerate(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let (mut total, mut err) = (v, e);
    let mut panels = 1;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if panels >= tol.max_subdivisions {
            return Err(Error::QuadAccuracy {
                estimate: total,
                error_bound: err,
            });
        }
        let p = heap.pop().expect("heap holds at least one panel");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            // Panel cannot be split further in floating point.
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite integrand on [{}, {}]",
                p.a, p.b
            )));
        }
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel {
            a: p.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: p.b,
            value: v2,
            error: e2,
        });
        panels += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    if err > tol.abs.max(tol.rel * total.abs()) && panels >= tol.max_subdivisions {
        return Err(Error::QuadAccuracy {
            estimate: total,
            error_bound: err,
        });
    }
    Ok((total, err))
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<f64> {
    integrate_with_error(f, a, b, tol).map(|(v, _)| v)
}

/// Integral over `[a, b]` (either orientation) of an integrand with a
/// square-root type singularity at one endpoint.
///
/// The integrand is called as `f(y, gap)` where `gap = |y - c| >= 0` is the
/// exact distance to the singular endpoint `c`, so callers can form
/// differences like `e^c - e^y` without cancellation. The substitution
/// `y = c -/+ s^2` makes the transformed integrand smooth.
pub fn integrate_sqrt_singular_gap<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    at: Singularity,
    tol: QuadTolerance,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let dir = (b - a).signum();
    let root_len = (b - a).abs().sqrt();
    match at {
        Singularity::None => integrate(|y| f(y, f64::NAN), a, b, tol),
        Singularity::Upper => integrate(
            |s| {
                let gap = s * s;
                2.0 * s * f(b - dir * gap, gap)
            },
            0.0,
            root_len,
            tol,
        )
        .map(|v| dir * v),
        Singularity::Lower => integrate(
            |s| {
                let gap = s * s;
                2.0 * s * f(a + dir * gap, gap)
            },
            0.0,
            root_len,
            tol,
        )
        .map(|v| dir * v),
    }
}

/// Like [`integrate_sqrt_singular_gap`] for integrands that only need `y`.
pub fn integrate_sqrt_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    at: Singularity,
    tol: QuadTolerance,
) -> Result<f64> {
    integrate_sqrt_singular_gap(|y, _| f(y), a, b, at, tol)
}

/// Closed search interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
        }
        Ok(Bracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

const ROOT_MAX_ITER: usize = 300;

/// Brent's method on a sign-changing bracket. Stops when `|f| <= tol` or
/// the bracket has shrunk below `tol` (or to floating-point resolution).
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::Degenerate(format!(
            "non-finite function value at bracket [{a}, {b}]"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..ROOT_MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Degenerate(format!(
                "non-finite function value at {b}"
            )));
        }
    }
    Err(Error::NotConverged {
        reason: "root finder exceeded its iteration budget".into(),
        value: b,
        residual: fb,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
    /// The minimizer sits on the final search interval's boundary.
    pub boundary: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub tol: f64,
    /// Largest allowed width of the search interval relative to the initial one.
    pub max_expansion: f64,
    pub expand_lower: bool,
    pub expand_upper: bool,
}

impl MinimizeOptions {
    pub fn new(tol: f64) -> Self {
        MinimizeOptions {
            tol,
            max_expansion: 1024.0,
            expand_lower: true,
            expand_upper: true,
        }
    }

    pub fn fixed(tol: f64) -> Self {
        MinimizeOptions {
            tol,
            max_expansion: 1.0,
            expand_lower: false,
            expand_upper: false,
        }
    }
}

/// Golden-section minimization on `bracket`, widening the interval (up to
/// `max_expansion` times its initial width) while the minimizer is found on
/// an expandable edge. Endpoints are evaluated, so a monotone objective
/// yields its boundary minimum with `boundary = true`. Non-finite values
/// are treated as `+inf`. Exact ties resolve to the smallest argument.
pub fn minimize_scalar_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: Bracket,
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("minimizer tolerance must be positive".into()));
    }
    let mut evals = 0usize;
    let mut eval = |x: f64, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let w0 = bracket.width();
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    loop {
        let m = golden(&mut |x| eval(x, &mut evals), lo, hi, opts.tol);
        let at_lo = m.argmin - lo <= 2.0 * opts.tol;
        let at_hi = hi - m.argmin <= 2.0 * opts.tol;
        let room = (hi - lo) * 2.0 <= opts.max_expansion * w0 * (1.0 + 1e-12);
        if at_lo && opts.expand_lower && room {
            lo -= hi - lo;
            continue;
        }
        if at_hi && opts.expand_upper && room {
            hi += hi - lo;
            continue;
        }
        if !m.value.is_finite() {
            return Err(Error::Infeasible(format!(
                "objective is infinite on the whole interval [{lo}, {hi}]"
            )));
        }
        return Ok(Minimum {
            argmin: m.argmin,
            value: m.value,
            boundary: at_lo || at_hi,
            evaluations: evals,
        });
    }
}

/// [`minimize_scalar_with`] with the default expansion policy.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(f: F, bracket: Bracket, tol: f64) -> Result<Minimum> {
    minimize_scalar_with(f, bracket, &MinimizeOptions::new(tol))
}

struct Golden {
    argmin: f64,
    value: f64,
}

fn golden(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Golden {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = Golden {
        argmin: lo,
        value: f(lo),
    };
    let consider = |x: f64, v: f64, best: &mut Golden| {
        if v < best.value || (v == best.value && x < best.argmin) {
            best.argmin = x;
            best.value = v;
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}
