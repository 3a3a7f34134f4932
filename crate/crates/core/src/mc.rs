//! Monte Carlo simulation of the model and of realized-variance payoffs.
//!
//! Paths are stepped in log coordinates. Each path (or antithetic pair) owns
//! a ChaCha stream keyed by `(seed, index)` and reductions run in a fixed
//! pairwise order, so results do not depend on the number of worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LsvModel;
use crate::smile::{black_vega, implied_vol, OptionFlag, SmileCurve, SmilePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    LogEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub maturity: f64,
    pub scheme: Scheme,
    pub antithetic: bool,
    /// Worker threads, 0 for the rayon default. Has no effect on results.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            n_steps: 2000,
            seed: 42,
            maturity: 1.0 / 12.0,
            scheme: Scheme::LogEuler,
            antithetic: true,
            threads: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 paths, got {}",
                self.n_paths
            )));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        if self.n_steps < 1 {
            return Err(Error::Domain("need at least one time step".into()));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::Domain(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        if self.threads == 0 {
            return Ok(job());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Independent samples behind the estimate (pairs when antithetic).
    pub n_effective: usize,
    pub seed: u64,
    pub config: McConfig,
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Realized variance `(1/T) int_0^T V eta^2(S) ds` per path, antithetic
/// partners adjacent.
#[derive(Debug, Clone, PartialEq)]
pub struct RvSamples {
    pub values: Vec<f64>,
    pub config: McConfig,
}

impl RvSamples {
    /// Mean and standard error of `payoff(RV)`, treating antithetic pairs as
    /// one sample.
    pub fn estimate(&self, payoff: impl Fn(f64) -> f64) -> McEstimate {
        let per = if self.config.antithetic { 2 } else { 1 };
        let units: Vec<f64> = self
            .values
            .chunks(per)
            .map(|c| c.iter().map(|&v| payoff(v)).sum::<f64>() / per as f64)
            .collect();
        let n = units.len();
        let mean = pairwise_sum(&units) / n as f64;
        let dev: Vec<f64> = units.iter().map(|u| (u - mean) * (u - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        McEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_effective: n,
            seed: self.config.seed,
            config: self.config,
        }
    }
}

struct Stepper<'a> {
    model: &'a LsvModel,
    n_steps: usize,
    dt: f64,
    sdt: f64,
    rho: f64,
    rho_bar: f64,
    drift_s: f64,
    /// Steps per discrete sampling interval, if the discrete sum is wanted.
    block: Option<usize>,
}

#[derive(Clone, Copy, Default)]
struct PathOut {
    integral: f64,
    discrete: f64,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a LsvModel, cfg: &McConfig, block: Option<usize>) -> Self {
        let dt = cfg.maturity / cfg.n_steps as f64;
        Stepper {
            model,
            n_steps: cfg.n_steps,
            dt,
            sdt: dt.sqrt(),
            rho: model.rho,
            rho_bar: (1.0 - model.rho * model.rho).max(0.0).sqrt(),
            drift_s: model.r - model.q,
            block,
        }
    }

    /// One path, or an antithetic pair driven by the same normals with
    /// opposite signs.
    fn simulate(&self, rng: &mut ChaCha8Rng, pair: bool) -> [PathOut; 2] {
        let m = self.model;
        let (v0, t) = (m.v0, self.dt * self.n_steps as f64);
        let legs = if pair { 2 } else { 1 };
        let (mut u, mut w) = ([0.0f64; 2], [0.0f64; 2]);
        let mut acc = [0.0f64; 2];
        let mut disc = [0.0f64; 2];
        let mut u_mark = [0.0f64; 2];
        for step in 0..self.n_steps {
            let z: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            for leg in 0..legs {
                let sign = if leg == 0 { 1.0 } else { -1.0 };
                let v = v0 * w[leg].exp();
                let eta = m.eta.value(u[leg]);
                let sig = m.sigma.value(w[leg]);
                let ev = eta * eta * v;
                acc[leg] += ev;
                let dz = sign * self.sdt * z;
                let db = sign * self.sdt * b;
                w[leg] += (m.mu.value(v) - 0.5 * sig * sig) * self.dt + sig * dz;
                u[leg] += (self.drift_s - 0.5 * ev) * self.dt
                    + eta * v.sqrt() * (self.rho * dz + self.rho_bar * db);
            }
            if let Some(block) = self.block {
                if (step + 1).is_multiple_of(block) {
                    for leg in 0..legs {
                        let r = u[leg] - u_mark[leg];
                        disc[leg] += r * r;
                    }
                    u_mark[..legs].copy_from_slice(&u[..legs]);
                }
            }
        }
        let mut out = [PathOut::default(); 2];
        for leg in 0..legs {
            out[leg] = PathOut {
                integral: acc[leg] / self.n_steps as f64,
                discrete: disc[leg] / t,
            };
        }
        out
    }
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn simulate_paths(model: &LsvModel, cfg: &McConfig, block: Option<usize>) -> Result<Vec<PathOut>> {
    cfg.validate()?;
    model.validate(None)?;
    let stepper = Stepper::new(model, cfg, block);
    let pair = cfg.antithetic;
    let units = cfg.units();
    cfg.run(|| {
        let chunks: Vec<[PathOut; 2]> = (0..units)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| stepper.simulate(&mut stream_rng(cfg.seed, i), pair))
            .collect();
        chunks
            .into_iter()
            .flat_map(|c| if pair { c.to_vec() } else { vec![c[0]] })
            .collect()
    })
}

/// Samples of the continuously monitored realized variance.
pub fn simulate_realized_variance(model: &LsvModel, cfg: &McConfig) -> Result<RvSamples> {
    let paths = simulate_paths(model, cfg, None)?;
    Ok(RvSamples {
        values: paths.iter().map(|p| p.integral).collect(),
        config: *cfg,
    })
}

/// Discounted call and put payoffs on one realized-variance sample. Their
/// difference is exactly `df (rv - k)`.
pub fn payoffs(rv: f64, k: f64, df: f64) -> (f64, f64) {
    let a = df * (rv - k);
    (a.max(0.0), (-a).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPrices {
    pub call: McEstimate,
    pub put: McEstimate,
    pub forward: McEstimate,
}

pub fn prices_from_samples(samples: &RvSamples, model: &LsvModel, k: f64) -> Result<McPrices> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!(
            "strike must be non-negative, got {k}"
        )));
    }
    let df = (-model.r * samples.config.maturity).exp();
    Ok(McPrices {
        call: samples.estimate(|rv| payoffs(rv, k, df).0),
        put: samples.estimate(|rv| payoffs(rv, k, df).1),
        forward: samples.estimate(|rv| rv),
    })
}

pub fn mc_price(model: &LsvModel, k: f64, cfg: &McConfig) -> Result<McPrices> {
    let samples = simulate_realized_variance(model, cfg)?;
    prices_from_samples(&samples, model, k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSmileRow {
    pub k: f64,
    pub x: f64,
    pub call: McEstimate,
    pub put: McEstimate,
    pub ivol: Option<f64>,
    pub ivol_se: Option<f64>,
    /// The OTM price is within three standard errors of zero.
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSmile {
    pub maturity: f64,
    pub forward: McEstimate,
    pub rows: Vec<McSmileRow>,
}

/// Implied vols from one path set shared by all strikes. Each strike is
/// inverted from its out-of-the-money payoff against the simulated forward.
/// Log-moneyness is reported against the limiting forward `eta0^2 V0`.
pub fn mc_smile(model: &LsvModel, strikes: &[f64], t: f64, cfg: &McConfig) -> Result<McSmile> {
    if let Some(k) = strikes.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::Domain(format!("strikes must be positive, got {k}")));
    }
    let cfg = McConfig {
        maturity: t,
        ..*cfg
    };
    let samples = simulate_realized_variance(model, &cfg)?;
    let forward = samples.estimate(|rv| rv);
    let f = forward.mean;
    let mut rows = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let p = prices_from_samples(&samples, model, k)?;
        let (flag, otm) = if k >= f {
            (OptionFlag::Call, &p.call)
        } else {
            (OptionFlag::Put, &p.put)
        };
        let (ivol, ivol_se) = match implied_vol(otm.mean, f, k, t, model.r, flag) {
            Ok(iv) if iv.warning.is_none() => {
                let vega = black_vega(f, k, iv.vol, t, model.r)?;
                (Some(iv.vol), Some(otm.stderr / vega))
            }
            _ => (None, None),
        };
        rows.push(McSmileRow {
            k,
            x: model.log_moneyness(k),
            unreliable: otm.mean < 3.0 * otm.stderr,
            call: p.call,
            put: p.put,
            ivol,
            ivol_se,
        });
    }
    Ok(McSmile {
        maturity: t,
        forward,
        rows,
    })
}

impl McSmile {
    /// Implied vols as a smile curve with bands at three standard errors.
    pub fn to_smile_curve(&self) -> SmileCurve {
        let points = self
            .rows
            .iter()
            .map(|r| {
                let band = r
                    .ivol
                    .zip(r.ivol_se)
                    .map(|(v, se)| (v - 3.0 * se, v + 3.0 * se));
                SmilePoint {
                    k: r.k,
                    x: r.x,
                    sigma_v: r.ivol,
                    lo: band.map(|b| b.0),
                    hi: band.map(|b| b.1),
                    price: Some(if r.k >= self.forward.mean {
                        r.call.mean
                    } else {
                        r.put.mean
                    }),
                    method: "mc".into(),
                }
            })
            .collect();
        SmileCurve { points }
    }

    /// CSV with columns `K, x, call, call_se, put, put_se, ivol, ivol_se`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Domain(format!("writing Monte Carlo CSV: {e}"));
        w.write_record([
            "K", "x", "call", "call_se", "put", "put_se", "ivol", "ivol_se",
        ])
        .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.x.to_string(),
                r.call.mean.to_string(),
                r.call.stderr.to_string(),
                r.put.mean.to_string(),
                r.put.stderr.to_string(),
                opt(r.ivol),
                opt(r.ivol_se),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Domain(format!("writing Monte Carlo CSV: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteRvReport {
    pub sampling_n: usize,
    pub continuous: Vec<f64>,
    pub discrete: Vec<f64>,
    pub mean_continuous: f64,
    pub mean_discrete: f64,
    /// Mean over paths of `(discrete - continuous) / continuous`.
    pub mean_relative_gap: f64,
}

/// Pairs the integral with the annualized sum of `sampling_n` squared log
/// returns on the same paths.
pub fn discrete_rv_diagnostic(
    model: &LsvModel,
    cfg: &McConfig,
    sampling_n: usize,
) -> Result<DiscreteRvReport> {
    if sampling_n == 0 || !cfg.n_steps.is_multiple_of(sampling_n) {
        return Err(Error::Domain(format!(
            "sampling count {sampling_n} must divide the step count {}",
            cfg.n_steps
        )));
    }
    let paths = simulate_paths(model, cfg, Some(cfg.n_steps / sampling_n))?;
    let continuous: Vec<f64> = paths.iter().map(|p| p.integral).collect();
    let discrete: Vec<f64> = paths.iter().map(|p| p.discrete).collect();
    let gaps: Vec<f64> = paths
        .iter()
        .map(|p| (p.discrete - p.integral) / p.integral)
        .collect();
    let n = paths.len() as f64;
    Ok(DiscreteRvReport {
        sampling_n,
        mean_continuous: pairwise_sum(&continuous) / n,
        mean_discrete: pairwise_sum(&discrete) / n,
        mean_relative_gap: pairwise_sum(&gaps) / n,
        continuous,
        discrete,
    })
}
