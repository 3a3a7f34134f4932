//! `varopt`: rate functions, limiting smiles, ATM limits and Monte Carlo
//! benchmarks for options on realized variance.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use lsv_varopt::atm::{atm_coefficients, atm_price_limit};
use lsv_varopt::mc::{mc_smile, simulate_realized_variance, McConfig, McEstimate};
use lsv_varopt::smile::{atm_implied_vol, atm_skew, linear_smile, SmileCurve};
use lsv_varopt::{Error, LsvModel, RateEstimate, RateRegistry};

pub mod grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

/// Correlations of the reference table and figures.
pub const TABLE_RHOS: [f64; 3] = [-0.7, 0.0, 0.7];

#[derive(Debug, Parser)]
#[command(
    name = "varopt",
    version,
    about = "Short-maturity asymptotics for options on realized variance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate function at one or more strikes, as JSON.
    Rate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strikes: StrikeArgs,
        #[arg(long, default_value = "closed", value_parser = parse_method)]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limiting implied-vol smile, as CSV.
    Smile {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strikes: StrikeArgs,
        #[arg(long, default_value = "closed", value_parser = parse_method)]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ATM price limit, level and skew of the limiting smile, as JSON.
    Atm {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo prices and implied vols, as CSV plus a metadata JSON file.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        strikes: StrikeArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metadata path; defaults to `<out>.meta.json` when `--out` is set.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// ATM level, skew and simulated forward for rho in {-0.7, 0, 0.7}.
    Table1 {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Skip the simulated forward column.
        #[arg(long)]
        no_mc: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulated smiles with bands and the linear smile for rho in {-0.7, 0, 0.7}.
    Figures {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "-0.1:0.1:21", allow_hyphen_values = true)]
        x: String,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model JSON; the Tanh reference model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Overrides the correlation of the model.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct StrikeArgs {
    /// Variance strikes: `lo:hi:n`, a comma-separated list, or one value.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Log-moneyness against `eta0^2 V0`, same syntax as `--k`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Maturity in years; accepts fractions such as `1/252`.
    #[arg(long = "T", default_value = "1/12", value_parser = parse_maturity)]
    pub maturity: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub no_antithetic: bool,
}

impl McArgs {
    pub fn config(&self) -> McConfig {
        McConfig {
            n_paths: self.paths,
            n_steps: self.steps,
            seed: self.seed,
            maturity: self.maturity,
            antithetic: !self.no_antithetic,
            threads: self.threads,
            ..Default::default()
        }
    }
}

fn parse_method(s: &str) -> Result<String, String> {
    let names = RateRegistry::default().names();
    if names.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!(
            "unknown method '{s}'; expected one of {}",
            names.join(", ")
        ))
    }
}

fn parse_maturity(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (
                a.trim()
                    .parse()
                    .map_err(|_| format!("bad maturity '{s}'"))?,
                b.trim()
                    .parse()
                    .map_err(|_| format!("bad maturity '{s}'"))?,
            );
            a / b
        }
        None => s
            .trim()
            .parse()
            .map_err(|_| format!("bad maturity '{s}'"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("maturity must be positive, got '{s}'"))
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Model(_) | Failure::Io(_) => EXIT_NUMERIC,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Usage(m) => json!({ "error": "usage", "message": m }),
            Failure::Io(m) => json!({ "error": "io", "message": m }),
            Failure::Model(e) => json!({ "error": e.kind(), "message": e.to_string() }),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_model(args: &ModelArgs) -> Result<LsvModel, Failure> {
    let mut model = match &args.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Usage(format!("cannot read model file {}: {e}", path.display()))
            })?;
            LsvModel::from_json(&text)?
        }
        None => LsvModel::tanh_reference(0.0),
    };
    if let Some(rho) = args.rho {
        model.rho = rho;
    }
    model.validate(None)?;
    Ok(model)
}

/// Strikes and their log-moneyness from `--k` or `--x`.
fn strikes(model: &LsvModel, args: &StrikeArgs) -> Result<Vec<(f64, f64)>, Failure> {
    let f0 = model.forward_variance_limit();
    match (&args.k, &args.x) {
        (Some(k), _) => Ok(grid::parse_grid(k)
            .map_err(Failure::Usage)?
            .into_iter()
            .map(|k| (k, model.log_moneyness(k)))
            .collect()),
        (None, Some(x)) => Ok(grid::parse_grid(x)
            .map_err(Failure::Usage)?
            .into_iter()
            .map(|x| (f0 * x.exp(), x))
            .collect()),
        (None, None) => Err(Failure::Usage("one of --k or --x is required".into())),
    }
}

fn emit(out: &Option<PathBuf>, bytes: &[u8], stdout: &mut dyn Write) -> CmdResult {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        None => stdout
            .write_all(bytes)
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn to_json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

/// SHA-256 of the model's canonical JSON.
pub fn model_hash(model: &LsvModel) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(model).expect("serializable"),
    ))
}

#[derive(Serialize)]
struct RateRow {
    k: f64,
    x: f64,
    #[serde(flatten)]
    estimate: RateEstimate,
}

fn cmd_rate(
    model: &ModelArgs,
    sa: &StrikeArgs,
    method: &str,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model)?;
    let registry = RateRegistry::default();
    let m = registry.get(method)?;
    let rows = strikes(&model, sa)?
        .into_iter()
        .map(|(k, x)| {
            Ok(RateRow {
                k,
                x,
                estimate: m.estimate(&model, k)?,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let bytes = if rows.len() == 1 {
        to_json_bytes(&rows[0])
    } else {
        to_json_bytes(&rows)
    };
    emit(out, &bytes, stdout)
}

fn cmd_smile(
    model: &ModelArgs,
    sa: &StrikeArgs,
    method: &str,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model)?;
    let curve = match (&sa.k, &sa.x) {
        (None, Some(x)) => SmileCurve::from_log_moneyness(
            &model,
            &grid::parse_grid(x).map_err(Failure::Usage)?,
            method,
        )?,
        _ => {
            let ks: Vec<f64> = strikes(&model, sa)?.into_iter().map(|(k, _)| k).collect();
            SmileCurve::from_strikes(&model, &ks, method)?
        }
    };
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    emit(out, &buf, stdout)
}

fn cmd_atm(model: &ModelArgs, out: &Option<PathBuf>, stdout: &mut dyn Write) -> CmdResult {
    let model = load_model(model)?;
    let c = atm_coefficients(&model)?;
    let v = json!({
        "forward_limit": model.forward_variance_limit(),
        "a": c.a,
        "b": c.b,
        "d": c.d,
        "price_limit": atm_price_limit(&model)?,
        "sigma_atm": atm_implied_vol(&model)?,
        "skew": atm_skew(&model)?,
    });
    emit(out, &to_json_bytes(&v), stdout)
}

fn cmd_mc(
    model: &ModelArgs,
    sa: &StrikeArgs,
    mc: &McArgs,
    out: &Option<PathBuf>,
    meta: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model)?;
    let ks: Vec<f64> = strikes(&model, sa)?.into_iter().map(|(k, _)| k).collect();
    let cfg = mc.config();
    let smile = mc_smile(&model, &ks, cfg.maturity, &cfg)?;
    let mut buf = Vec::new();
    smile.write_csv(&mut buf)?;
    emit(out, &buf, stdout)?;
    let meta_path = meta
        .clone()
        .or_else(|| out.as_ref().map(|p| meta_path_for(p)));
    if let Some(path) = meta_path {
        let unreliable: Vec<f64> = smile
            .rows
            .iter()
            .filter(|r| r.unreliable)
            .map(|r| r.k)
            .collect();
        let v = json!({
            "seed": cfg.seed,
            "config": cfg,
            "model_hash": model_hash(&model),
            "model": model,
            "forward": smile.forward,
            "unreliable_strikes": unreliable,
        });
        emit(&Some(path), &to_json_bytes(&v), stdout)?;
    }
    Ok(())
}

fn meta_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub rho: f64,
    pub sigma_atm: f64,
    pub s_v: f64,
    pub forward: Option<McEstimate>,
}

/// Formula columns, and the simulated forward unless `mc` is `None`.
pub fn table1_rows(model: &LsvModel, mc: Option<&McConfig>) -> lsv_varopt::Result<Vec<Table1Row>> {
    TABLE_RHOS
        .iter()
        .map(|&rho| {
            let m = model.with_rho(rho);
            let forward = match mc {
                Some(cfg) => Some(simulate_realized_variance(&m, cfg)?.estimate(|v| v)),
                None => None,
            };
            Ok(Table1Row {
                rho,
                sigma_atm: atm_implied_vol(&m)?,
                s_v: atm_skew(&m)?,
                forward,
            })
        })
        .collect()
}

fn cmd_table1(
    model: &ModelArgs,
    mc: &McArgs,
    no_mc: bool,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model)?;
    let cfg = mc.config();
    let rows = table1_rows(&model, (!no_mc).then_some(&cfg))?;
    let notes = [
        "sigma_atm = sqrt((sigma0^2 + 4 rho sigma0 sqrt(V0) eta1 + 4 eta1^2 V0) / 3)",
        "s_v is evaluated from the skew formula for every rho; at rho = 0 it gives 0.1159, \
         while the reference table lists 0.1553",
        "at rho = -0.7 the level formula gives 1.180549, which rounds to 1.1805; the reference table lists 1.1806",
        "forward is the simulated mean realized variance at maturity T",
    ];
    let v = json!({
        "maturity": cfg.maturity,
        "mc": (!no_mc).then_some(cfg),
        "rows": rows,
        "notes": notes,
    });
    emit(out, &to_json_bytes(&v), stdout)
}

fn cmd_figures(
    model: &ModelArgs,
    x: &str,
    mc: &McArgs,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let model = load_model(model)?;
    let xs = grid::parse_grid(x).map_err(Failure::Usage)?;
    let cfg = mc.config();
    let f0 = model.forward_variance_limit();
    let ks: Vec<f64> = xs.iter().map(|x| f0 * x.exp()).collect();
    let mut rows: Vec<String> = vec!["rho,T,K,x,mc_ivol,mc_ivol_se,mc_lo,mc_hi,linear".into()];
    for rho in TABLE_RHOS {
        let m = model.with_rho(rho);
        let smile = mc_smile(&m, &ks, cfg.maturity, &cfg)?;
        for (r, &x) in smile.rows.iter().zip(&xs) {
            let lin = linear_smile(&m, x)?;
            let (iv, se, lo, hi) = match (r.ivol, r.ivol_se) {
                (Some(iv), Some(se)) => (
                    iv.to_string(),
                    se.to_string(),
                    (iv - 3.0 * se).to_string(),
                    (iv + 3.0 * se).to_string(),
                ),
                _ => Default::default(),
            };
            rows.push(format!(
                "{rho},{},{},{x},{iv},{se},{lo},{hi},{lin}",
                cfg.maturity, r.k
            ));
        }
    }
    let mut text = rows.join("\n");
    text.push('\n');
    emit(out, text.as_bytes(), stdout)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Rate {
            model,
            strikes,
            method,
            out,
        } => cmd_rate(model, strikes, method, out, stdout),
        Command::Smile {
            model,
            strikes,
            method,
            out,
        } => cmd_smile(model, strikes, method, out, stdout),
        Command::Atm { model, out } => cmd_atm(model, out, stdout),
        Command::Mc {
            model,
            strikes,
            mc,
            out,
            meta,
        } => cmd_mc(model, strikes, mc, out, meta, stdout),
        Command::Table1 {
            model,
            mc,
            no_mc,
            out,
        } => cmd_table1(model, mc, *no_mc, out, stdout),
        Command::Figures { model, x, mc, out } => cmd_figures(model, x, mc, out, stdout),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Failures print a JSON diagnostic on `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{e}");
            let _ = writeln!(stderr, "{}", Failure::Usage(e.kind().to_string()).to_json());
            return EXIT_USAGE;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.to_json());
            f.exit_code()
        }
    }
}
