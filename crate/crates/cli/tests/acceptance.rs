//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//!     cargo test -p lsv-varopt-cli --test acceptance

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsv_varopt::atm::{atm_coefficients, atm_price_limit, ExpansionPaths};
use lsv_varopt::mc::{mc_price, mc_smile, payoffs, simulate_realized_variance, McConfig};
use lsv_varopt::quad::{integrate_sqrt_singular, QuadTolerance, Singularity};
use lsv_varopt::rate_general::{lambda_functional, rate_bounds_rho, rate_numeric, NumericOptions};
use lsv_varopt::rate_zero::{asian_rate_constant, rate_zero_rho, ZeroRhoOptions};
use lsv_varopt::smile::{black_price, implied_vol, linear_smile, OptionFlag};
use lsv_varopt::{EtaSpec, LsvModel, SigmaSpec};
use varopt_cli::table1_rows;

// Tolerances.
const FOUR_DECIMALS: f64 = 0.5e-4;
const TABLE_RUNTIME_S: f64 = 1.0;
const FORWARD_TARGET: f64 = 0.1004;
const FORWARD_TOL: f64 = 0.0003;
const FORWARD_FAST_TOL: f64 = 0.001;
const FORWARD_RUNTIME_S: f64 = 120.0;
const SMILE_FLOOR: f64 = 0.02;
const N_SIGMA: f64 = 3.0;
const ZERO_RHO_REL: f64 = 1e-4;
const ZERO_RHO_RUNTIME_S: f64 = 30.0;
const SANDWICH_SLACK: f64 = 1e-6;
const EXPANSION_SLOPE: f64 = 3.7;
const EXPANSION_GRID: usize = 4001;
const ETA_ONE_REL: f64 = 1e-14;
const ASIAN_TOL: f64 = 1e-9;
const IVOL_ROUND_TRIP: f64 = 1e-10;
const QUAD_EXACT: f64 = 1e-12;

const T_SHORT: f64 = 1.0 / 252.0;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn strike(m: &LsvModel, x: f64) -> f64 {
    m.forward_variance_limit() * x.exp()
}

fn table_levels() -> Outcome {
    let start = Instant::now();
    let rows = table1_rows(&LsvModel::tanh_reference(0.0), None).expect("table rows");
    let secs = start.elapsed().as_secs_f64();
    let expect = [1.1806, 1.1553, 1.1294];
    let mut ok = secs < TABLE_RUNTIME_S;
    let mut detail = Vec::new();
    for (row, e) in rows.iter().zip(expect) {
        let hit = (row.sigma_atm - e).abs() <= FOUR_DECIMALS;
        ok &= hit;
        detail.push(format!(
            "rho {:+}: {:.6} vs {e}{}",
            row.rho,
            row.sigma_atm,
            if hit { "" } else { " (miss)" }
        ));
    }
    outcome(ok, format!("{}; {secs:.3} s", detail.join(", ")))
}

fn table_skews() -> Outcome {
    let start = Instant::now();
    let rows = table1_rows(&LsvModel::tanh_reference(0.0), None).expect("table rows");
    let secs = start.elapsed().as_secs_f64();
    let hits = (rows[0].s_v - 0.1257).abs() <= FOUR_DECIMALS
        && (rows[2].s_v - 0.1053).abs() <= FOUR_DECIMALS
        && (rows[1].s_v - 0.1159).abs() <= FOUR_DECIMALS;
    let out = Command::new(env!("CARGO_BIN_EXE_varopt"))
        .args(["table1", "--no-mc"])
        .output()
        .expect("run varopt");
    let noted = String::from_utf8_lossy(&out.stdout).contains("0.1553");
    outcome(
        hits && noted && secs < TABLE_RUNTIME_S,
        format!(
            "s_V = {:.6}, {:.6}, {:.6}; rho = 0 discrepancy noted: {noted}; {secs:.3} s",
            rows[0].s_v, rows[1].s_v, rows[2].s_v
        ),
    )
}

fn table_forward() -> Outcome {
    let m = LsvModel::tanh_reference(-0.7);
    let start = Instant::now();
    let full = simulate_realized_variance(&m, &McConfig::default())
        .expect("mc")
        .estimate(|v| v);
    let secs = start.elapsed().as_secs_f64();
    let fast = simulate_realized_variance(
        &m,
        &McConfig {
            n_steps: 500,
            ..Default::default()
        },
    )
    .expect("mc")
    .estimate(|v| v);
    let ok = (full.mean - FORWARD_TARGET).abs() <= FORWARD_TOL
        && (fast.mean - FORWARD_TARGET).abs() <= FORWARD_FAST_TOL
        && secs <= FORWARD_RUNTIME_S;
    outcome(
        ok,
        format!(
            "F_V(1/12) = {:.6} +- {:.6} ({secs:.1} s), fast {:.6}",
            full.mean, full.stderr, fast.mean
        ),
    )
}

fn smile_agreement() -> Outcome {
    let cfg = McConfig {
        n_steps: 500,
        ..Default::default()
    };
    let mut ok = true;
    let mut worst = 0.0f64;
    for rho in [-0.7, 0.0, 0.7] {
        let m = LsvModel::tanh_reference(rho);
        let ks: Vec<f64> = [-0.08, 0.0, 0.08].iter().map(|&x| strike(&m, x)).collect();
        let s = mc_smile(&m, &ks, T_SHORT, &cfg).expect("mc smile");
        for r in &s.rows {
            let (Some(iv), Some(se)) = (r.ivol, r.ivol_se) else {
                ok = false;
                continue;
            };
            let gap = (iv - linear_smile(&m, r.x).expect("linear smile")).abs();
            ok &= gap <= (N_SIGMA * se).max(SMILE_FLOOR);
            worst = worst.max(gap);
        }
    }
    outcome(ok, format!("largest |MC - linear| = {worst:.4}"))
}

fn atm_limit() -> Outcome {
    let m = LsvModel::tanh_reference(0.0);
    let limit = atm_price_limit(&m).expect("limit");
    let cfg = McConfig {
        n_steps: 500,
        maturity: T_SHORT,
        ..Default::default()
    };
    let p = mc_price(&m, m.forward_variance_limit(), &cfg).expect("mc");
    let st = T_SHORT.sqrt();
    let (c, cs, q, qs) = (
        p.call.mean / st,
        p.call.stderr / st,
        p.put.mean / st,
        p.put.stderr / st,
    );
    let ok = (c - limit).abs() <= N_SIGMA * cs
        && (q - limit).abs() <= N_SIGMA * qs
        && (c - q).abs() <= cs.hypot(qs);
    outcome(
        ok,
        format!("call {c:.6} +- {cs:.6}, put {q:.6} +- {qs:.6}, limit {limit:.6}"),
    )
}

fn zero_rho_numeric() -> Outcome {
    let m = LsvModel::tanh_reference(0.0);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for x in [-0.1, -0.05, 0.05, 0.1] {
        let k = strike(&m, x);
        let closed = rate_zero_rho(&m, k, &ZeroRhoOptions::default())
            .expect("closed")
            .value;
        let numeric = rate_numeric(&m, k, &NumericOptions::default())
            .expect("numeric")
            .value;
        worst = worst.max((numeric - closed).abs() / closed);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= ZERO_RHO_REL && secs <= ZERO_RHO_RUNTIME_S,
        format!("max relative gap {worst:.2e}; {secs:.1} s"),
    )
}

fn bound_sandwich() -> Outcome {
    let mut ok = true;
    let mut misses = Vec::new();
    for rho in [-0.7, -0.3, 0.3, 0.7] {
        let m = LsvModel::tanh_reference(rho);
        for x in [-0.1, -0.05, 0.05, 0.1] {
            let k = strike(&m, x);
            let b = rate_bounds_rho(&m, k).expect("bounds");
            let i = rate_numeric(&m, k, &NumericOptions::default())
                .expect("numeric")
                .value;
            if !(b.lower <= i && i <= b.best_upper + SANDWICH_SLACK) {
                ok = false;
                misses.push(format!(
                    "rho {rho} x {x}: {} <= {i} <= {}",
                    b.lower, b.best_upper
                ));
            }
        }
    }
    outcome(
        ok,
        if ok {
            "16 of 16 cases".into()
        } else {
            misses.join("; ")
        },
    )
}

fn expansion_consistency() -> Outcome {
    let mut ok = true;
    let mut slopes = Vec::new();
    for rho in [0.0, 0.7, -0.7] {
        let m = LsvModel::tanh_reference(rho);
        let c = atm_coefficients(&m).expect("coefficients");
        let e = ExpansionPaths::of(&m).expect("paths");
        let r: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&x| {
                let l = lambda_functional(&m, &e.paths(&m, x, 2, EXPANSION_GRID))
                    .expect("action")
                    .total;
                (l - c.a * x * x - c.b * x * x * x).abs()
            })
            .collect();
        for w in r.windows(2) {
            let s = (w[0] / w[1]).log2();
            ok &= s >= EXPANSION_SLOPE;
            slopes.push(s);
        }
    }
    // eta = 1: A = 3 / (2 sigma0^2), B = -3 (sigma0 + 6 sigma1) / (10 sigma0^3).
    let mut worst = 0.0f64;
    for (s0, s1) in [(2.0, 0.0), (0.7, 0.3), (1.3, -0.4), (3.1, 1.7)] {
        let mut m = LsvModel::tanh_reference(0.4);
        m.eta = EtaSpec::Constant { eta0: 1.0 };
        m.sigma = SigmaSpec::LogPoly {
            sigma0: s0,
            sigma1: s1,
            sigma2: 0.0,
            clamp_lo: 1e-3,
            clamp_hi: 1e3,
        };
        let c = atm_coefficients(&m).expect("coefficients");
        let (a, b) = (1.5 / (s0 * s0), -0.3 * (s0 + 6.0 * s1) / (s0 * s0 * s0));
        worst = worst.max(((c.a - a) / a).abs()).max(((c.b - b) / b).abs());
    }
    ok &= worst <= ETA_ONE_REL;
    let slopes: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    outcome(
        ok,
        format!(
            "slopes [{}]; eta = 1 coefficient error {worst:.1e}",
            slopes.join(", ")
        ),
    )
}

fn asian_reduction() -> Outcome {
    let mut m = LsvModel::tanh_reference(0.0);
    m.eta = EtaSpec::Constant { eta0: 1.0 };
    let mut worst = 0.0f64;
    for ratio in [0.7, 0.9, 1.1, 1.5] {
        let k = m.v0 * ratio;
        let r = rate_zero_rho(&m, k, &ZeroRhoOptions::default())
            .expect("rate")
            .value;
        let j = asian_rate_constant(2.0, ratio - 1.0).expect("asian").value;
        worst = worst.max((r - j).abs());
    }
    outcome(worst <= ASIAN_TOL, format!("max |I - J| = {worst:.1e}"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut iv_worst = 0.0f64;
    for _ in 0..1000 {
        let f = rng.random_range(0.05..0.2);
        let sigma = rng.random_range(0.3..3.0);
        let t = rng.random_range(T_SHORT..1.0);
        let r = rng.random_range(0.0..0.05);
        let k = f * (rng.random_range(-2.5..2.5) * sigma * f64::sqrt(t)).exp();
        let flag = if rng.random_bool(0.5) {
            OptionFlag::Call
        } else {
            OptionFlag::Put
        };
        let p = black_price(f, k, sigma, t, r, flag).expect("price");
        let iv = implied_vol(p, f, k, t, r, flag).expect("implied vol");
        iv_worst = iv_worst.max((iv.vol - sigma).abs());
    }
    let m = LsvModel::tanh_reference(-0.7);
    let cfg = McConfig {
        n_paths: 4000,
        n_steps: 100,
        ..Default::default()
    };
    let samples = simulate_realized_variance(&m, &cfg).expect("mc");
    let parity = samples.values.iter().all(|&rv| {
        let (c, p) = payoffs(rv, 0.1, 0.97);
        c - p == 0.97 * (rv - 0.1)
    });
    let deterministic = determinism_across_threads();
    let tol = QuadTolerance {
        rel: 1e-14,
        abs: 1e-16,
        ..Default::default()
    };
    let quad_cases: [(f64, f64); 3] = [
        (
            integrate_sqrt_singular(
                |y| (1.0 + y + y * y * y) / y.sqrt(),
                0.0,
                1.0,
                Singularity::Lower,
                tol,
            )
            .expect("quad"),
            2.0 + 2.0 / 3.0 + 2.0 / 7.0,
        ),
        (
            integrate_sqrt_singular(
                |y| y * y / (1.0 - y).sqrt(),
                0.0,
                1.0,
                Singularity::Upper,
                tol,
            )
            .expect("quad"),
            16.0 / 15.0,
        ),
        (
            integrate_sqrt_singular(
                |y| 1.0 / (2.0 - y).sqrt(),
                1.0,
                2.0,
                Singularity::Upper,
                tol,
            )
            .expect("quad"),
            2.0,
        ),
    ];
    let quad_worst = quad_cases
        .iter()
        .fold(0.0f64, |w, (got, want)| w.max((got - want).abs()));
    let ok = iv_worst <= IVOL_ROUND_TRIP && parity && deterministic && quad_worst <= QUAD_EXACT;
    outcome(
        ok,
        format!(
            "ivol round trip {iv_worst:.1e}; parity exact {parity}; thread-count determinism {deterministic}; quadrature {quad_worst:.1e}"
        ),
    )
}

fn determinism_across_threads() -> bool {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |threads: &str| {
        let out = dir.path().join(format!("mc_{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_varopt"))
            .args([
                "mc",
                "--rho=-0.7",
                "--x",
                "-0.1:0.1:5",
                "--T",
                "1/12",
                "--paths",
                "2000",
                "--steps",
                "100",
            ])
            .args(["--seed", "11", "--threads", threads, "--out"])
            .arg(&out)
            .status()
            .expect("run varopt");
        assert!(status.success());
        let meta =
            std::fs::read(dir.path().join(format!("mc_{threads}.csv.meta.json"))).expect("meta");
        (std::fs::read(&out).expect("csv"), meta)
    };
    let one = run("1");
    one == run("3") && one == run("8")
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("ATM levels", table_levels),
        ("ATM skews", table_skews),
        ("simulated forward", table_forward),
        ("short-maturity smile", smile_agreement),
        ("ATM sqrt(T) limit", atm_limit),
        ("zero correlation closed vs numeric", zero_rho_numeric),
        ("bound sandwich", bound_sandwich),
        ("expansion consistency", expansion_consistency),
        ("Asian reduction", asian_reduction),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<36} {}  {}",
            i + 1,
            name,
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
