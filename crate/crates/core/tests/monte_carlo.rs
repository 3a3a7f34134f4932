use lsv_varopt::mc::{
    discrete_rv_diagnostic, mc_price, mc_smile, simulate_realized_variance, McConfig,
};
use lsv_varopt::smile::linear_smile;
use lsv_varopt::{EtaSpec, LsvModel};

fn cfg(n_paths: usize, n_steps: usize) -> McConfig {
    McConfig {
        n_paths,
        n_steps,
        ..Default::default()
    }
}

#[test]
fn bit_identical_across_thread_counts() {
    let m = LsvModel::tanh_reference(-0.7);
    let runs: Vec<Vec<f64>> = [1, 2, 5]
        .iter()
        .map(|&threads| {
            simulate_realized_variance(
                &m,
                &McConfig {
                    threads,
                    ..cfg(3000, 40)
                },
            )
            .unwrap()
            .values
        })
        .collect();
    assert!(runs.iter().all(|r| r
        .iter()
        .map(|v| v.to_bits())
        .eq(runs[0].iter().map(|v| v.to_bits()))));
}

#[test]
fn stderr_scales_with_path_count() {
    let m = LsvModel::tanh_reference(0.0);
    let se: Vec<f64> = [10_000, 40_000, 160_000]
        .iter()
        .map(|&n| {
            simulate_realized_variance(&m, &cfg(n, 20))
                .unwrap()
                .estimate(|v| v)
                .stderr
        })
        .collect();
    for w in se.windows(2) {
        assert!((w[0] / w[1] / 2.0 - 1.0).abs() < 0.2, "{se:?}");
    }
}

#[test]
fn halving_the_step_moves_the_mean_within_noise() {
    let m = LsvModel::tanh_reference(-0.7);
    let coarse = simulate_realized_variance(&m, &cfg(100_000, 250))
        .unwrap()
        .estimate(|v| v);
    let fine = simulate_realized_variance(&m, &cfg(100_000, 500))
        .unwrap()
        .estimate(|v| v);
    assert!(
        (coarse.mean - fine.mean).abs() < 2.0 * coarse.stderr.hypot(fine.stderr),
        "{coarse:?} {fine:?}"
    );
}

#[test]
fn unit_leverage_forward_near_the_limit() {
    let mut m = LsvModel::tanh_reference(0.0);
    m.eta = EtaSpec::Constant { eta0: 1.0 };
    let f = simulate_realized_variance(&m, &cfg(100_000, 200))
        .unwrap()
        .estimate(|v| v);
    assert!((f.mean - 0.1).abs() <= 3.0 * f.stderr, "{f:?}");
}

#[test]
fn zero_strike_prices() {
    let m = LsvModel::tanh_reference(0.7);
    let p = mc_price(&m, 0.0, &cfg(2000, 20)).unwrap();
    assert_eq!(p.put.mean, 0.0);
    assert_eq!(p.call.mean, p.forward.mean);
    assert!(mc_price(&m, -0.1, &cfg(2000, 20)).is_err());
}

#[test]
fn smile_rejects_bad_strikes() {
    let m = LsvModel::tanh_reference(0.0);
    assert!(mc_smile(&m, &[0.1, 0.0], 1.0 / 252.0, &cfg(2000, 20)).is_err());
}

#[test]
fn atm_point_matches_limiting_level() {
    let m = LsvModel::tanh_reference(0.0);
    let s = mc_smile(&m, &[0.1], 1.0 / 252.0, &cfg(100_000, 200)).unwrap();
    let r = &s.rows[0];
    let (iv, se) = (r.ivol.unwrap(), r.ivol_se.unwrap());
    assert!((iv - 1.1553).abs() <= (3.0 * se).max(0.02), "{iv} +- {se}");
    let curve = s.to_smile_curve();
    assert!(curve.points[0].lo.unwrap() < iv && iv < curve.points[0].hi.unwrap());
}

#[test]
fn longer_maturity_deviates_more_from_linear_smile() {
    for rho in [-0.7, 0.7] {
        let m = LsvModel::tanh_reference(rho);
        let ks: Vec<f64> = [-0.08f64, 0.0, 0.08]
            .iter()
            .map(|x| 0.1 * x.exp())
            .collect();
        let dev = |t: f64| {
            let s = mc_smile(&m, &ks, t, &cfg(100_000, 250)).unwrap();
            s.rows
                .iter()
                .map(|r| (r.ivol.unwrap() - linear_smile(&m, r.x).unwrap()).abs())
                .sum::<f64>()
        };
        let (short, month) = (dev(1.0 / 252.0), dev(1.0 / 12.0));
        assert!(month > short, "rho {rho}: {month} vs {short}");
    }
}

#[test]
fn discrete_sum_close_to_integral_at_fine_sampling() {
    let m = LsvModel::tanh_reference(-0.7);
    let r = discrete_rv_diagnostic(&m, &cfg(2000, 2000), 2000).unwrap();
    assert!(r.mean_relative_gap.abs() <= 0.05, "{}", r.mean_relative_gap);
    assert_eq!(r.continuous.len(), 2000);
    let again = discrete_rv_diagnostic(&m, &cfg(2000, 2000), 2000).unwrap();
    assert_eq!(r, again);
}

#[test]
fn single_sample_over_a_tiny_horizon() {
    let m = LsvModel::tanh_reference(0.0);
    let c = McConfig {
        maturity: 1e-6,
        ..cfg(2000, 1)
    };
    let r = discrete_rv_diagnostic(&m, &c, 1).unwrap();
    // One squared return over a single step: unbiased for the integral up to drift^2.
    assert!(
        (r.mean_discrete / r.mean_continuous - 1.0).abs() < 0.25,
        "{r:?}"
    );
}
