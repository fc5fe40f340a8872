//! Command-line front-end: `survive`, `bounds`, `theorem22`, `verify`.

mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dual::{run_dual_ensemble, DualParams, DEFAULT_MAX_FRONT};
use crate::error::{Error, EXIT_PASS, EXIT_USAGE};
use crate::estimate::{fekete_lower, tail_regression, DecayEstimate, FitWindow, SurvivalCurve};
use crate::killedwalk;
use crate::model::ModelRef;
use crate::spectral::{limit_scan, rate_bounds, FixedPointOptions};
use crate::verify::{run_suites, VerifyConfig};
use output::{emit, fmt_f64, to_json, to_json_line, Csv};

pub use config::{parse_config, parse_grid};

pub const THREADS_ENV: &str = "CONTACT_DECAY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "contact-decay", version, about = "Decay rates of subcritical contact processes")]
pub struct Cli {
    /// Flat key=value file; flags on the command line override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: $CONTACT_DECAY_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Survival curve of the origin from the dual process, with decay fits.
    Survive(SurviveArgs),
    /// Rigorous lower and upper bounds on the decay rate.
    Bounds(BoundsArgs),
    /// Bounds at rate lambda/d over a list of dimensions, against the limit.
    Theorem22(Theorem22Args),
    /// Run the property suites.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Survive(_) => "survive",
            Command::Bounds(_) => "bounds",
            Command::Theorem22(_) => "theorem22",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SurviveArgs {
    #[arg(long, default_value = "threshold")]
    pub model: String,
    #[arg(long = "d", default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    /// Sample times as start:stop:step.
    #[arg(long, default_value = "0:6:0.5")]
    pub t_grid: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Normal quantile for the Wilson intervals.
    #[arg(long, default_value_t = crate::stats::Z95)]
    pub z: f64,
    #[arg(long)]
    pub fit_lo: Option<f64>,
    #[arg(long)]
    pub fit_hi: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_FRONT)]
    pub max_front: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long, default_value = "threshold")]
    pub model: String,
    #[arg(long = "d", default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    /// Width of the bracket around the fixed point.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Source of R(e1, d, p): solver, monte-carlo or auto.
    #[arg(long, default_value = "auto")]
    pub provider: String,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Theorem22Args {
    #[arg(long, default_value = "threshold")]
    pub model: String,
    #[arg(long, default_value_t = 0.25)]
    pub lambda: f64,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_value = "1,2,3,5")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value = "auto")]
    pub provider: String,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Dual replicates for a simulated rate per dimension; 0 skips them.
    #[arg(long, default_value_t = 0)]
    pub mc_reps: u64,
    /// Largest dimension that gets a simulated rate.
    #[arg(long, default_value_t = 2)]
    pub mc_max_dim: usize,
    #[arg(long, default_value = "0:10:0.5")]
    pub t_grid: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Comma-separated suites (default: all).
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub suite: Vec<String>,
    #[arg(long, default_value = "threshold")]
    pub model: String,
    #[arg(long = "d", default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    /// Torus side for the coupling suite.
    #[arg(long = "L", default_value_t = 8)]
    pub side: usize,
    #[arg(long, default_value_t = 5.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 100)]
    pub runs: u64,
    #[arg(long, default_value_t = 20_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Shift p* before the eigencheck (negative control).
    #[arg(long, default_value_t = 0.0)]
    pub perturb_p: f64,
    /// Wall-clock budget in seconds; caps replicate counts.
    #[arg(long)]
    pub budget: Option<f64>,
}

/// What goes into output headers: enough to rerun and get the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: &'static str,
    pub subcommand: &'static str,
    pub format: Format,
    pub config_file: Option<PathBuf>,
    pub args: Command,
}

fn command() -> clap::Command {
    Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true))
}

/// Parse `argv`, merging a `--config` file in front of the flags given
/// after the subcommand so that the flags win.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let first = Cli::from_arg_matches(&command().try_get_matches_from(argv.clone())?)?;
    let Some(path) = first.config.clone() else {
        return Ok(first);
    };
    let entries = parse_config(&path).map_err(|e| command().error(clap::error::ErrorKind::Io, e.to_string()))?;
    let name = first.command.name();
    let at = argv
        .iter()
        .position(|a| a.to_str() == Some(name))
        .expect("subcommand was parsed from argv");
    let mut merged: Vec<OsString> = argv[..=at].to_vec();
    for (k, v) in entries {
        if k == "config" {
            continue;
        }
        merged.push(format!("--{k}").into());
        merged.push(v.into());
    }
    merged.extend_from_slice(&argv[at + 1..]);
    Cli::from_arg_matches(&command().try_get_matches_from(merged)?)
}

fn configure_threads(flag: Option<usize>) -> Result<(), Error> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse()
                    .map_err(|_| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`")))?,
            ),
            _ => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Usage("thread count must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point; returns the process exit status.
pub fn run(argv: Vec<OsString>) -> i32 {
    let cli = match parse(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Error> {
    configure_threads(cli.threads)?;
    let default_format = match cli.command {
        Command::Survive(_) => Format::Csv,
        _ => Format::Json,
    };
    let config = RunConfig {
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        format: cli.format.unwrap_or(default_format),
        config_file: cli.config.clone(),
        args: cli.command.clone(),
    };
    let (text, outcome) = match &cli.command {
        Command::Survive(a) => (survive(a, &config)?, Ok(())),
        Command::Bounds(a) => (bounds(a, &config)?, Ok(())),
        Command::Theorem22(a) => theorem22(a, &config)?,
        Command::Verify(a) => verify(a, &config)?,
    };
    emit(cli.out.as_deref(), &text)?;
    outcome
}

fn model(name: &str) -> Result<ModelRef, Error> {
    Ok(ModelRef::by_name(name)?)
}

fn fixed_point_options(tol: f64, provider: &str, seed: u64) -> Result<FixedPointOptions, Error> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    Ok(FixedPointOptions {
        tol,
        provider: killedwalk::provider(provider)?,
        seed,
        ..Default::default()
    })
}

/// A decay fit, or why it could not be made.
#[derive(Debug, Clone, Serialize)]
pub struct Fit {
    pub estimate: Option<DecayEstimate>,
    pub error: Option<String>,
}

impl<E: std::fmt::Display> From<Result<DecayEstimate, E>> for Fit {
    fn from(r: Result<DecayEstimate, E>) -> Self {
        match r {
            Ok(e) => Fit {
                estimate: Some(e),
                error: None,
            },
            Err(e) => Fit {
                estimate: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Both decay fits on a curve.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFits {
    pub window: FitWindow,
    pub fekete: Fit,
    pub regression: Fit,
}

pub fn decay_fits(curve: &SurvivalCurve, lo: Option<f64>, hi: Option<f64>) -> DecayFits {
    let d = curve.default_window();
    let window = FitWindow::new(lo.unwrap_or(d.t_lo), hi.unwrap_or(d.t_hi));
    DecayFits {
        window,
        fekete: fekete_lower(curve, &window).into(),
        regression: tail_regression(curve, &window).into(),
    }
}

fn survive(a: &SurviveArgs, config: &RunConfig) -> Result<String, Error> {
    if a.reps == 0 {
        return Err(Error::Usage("--reps must be at least 1".into()));
    }
    let times = parse_grid(&a.t_grid)?;
    let mut params = DualParams::new(model(&a.model)?, a.d, a.lambda, a.seed);
    params.max_front = a.max_front;
    let ens = run_dual_ensemble(&params, &times, a.reps)?;
    let curve = ens.survival_curve(a.z)?;
    let fits = decay_fits(&curve, a.fit_lo, a.fit_hi);
    match config.format {
        Format::Json => to_json(&json!({
            "config": config,
            "curve": curve,
            "mean_front_size": ens.mean_front_size(),
            "fits": fits,
        })),
        Format::Csv => {
            let mut csv = Csv::default();
            csv.comment("config", &to_json_line(config)?);
            csv.comment("fits", &to_json_line(&fits)?);
            csv.row(["t", "n", "k", "p_hat", "ci_lo", "ci_hi"]);
            for i in 0..curve.len() {
                csv.row([
                    fmt_f64(curve.times[i]),
                    a.reps.to_string(),
                    curve.survivors[i].to_string(),
                    fmt_f64(curve.p_hat[i]),
                    fmt_f64(curve.ci_lo[i]),
                    fmt_f64(curve.ci_hi[i]),
                ]);
            }
            Ok(csv.finish())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRecord {
    pub lambda: f64,
    pub d: usize,
    pub model: ModelRef,
    pub lower: Option<f64>,
    pub upper: f64,
    pub p_star: Option<f64>,
    pub mu: Option<f64>,
    pub r_e1: Option<f64>,
    /// Half-width of the interval for `r_e1`.
    pub r_error: Option<f64>,
    pub bracket: Option<crate::stats::Interval>,
    pub certified: Option<bool>,
    pub method: Option<String>,
    pub warning: Option<String>,
}

fn bounds(a: &BoundsArgs, config: &RunConfig) -> Result<String, Error> {
    let opts = fixed_point_options(a.tol, &a.provider, a.seed)?;
    let b = rate_bounds(a.lambda, a.d, model(&a.model)?, &opts)?;
    let fp = b.fixed_point.as_ref();
    let rec = BoundsRecord {
        lambda: a.lambda,
        d: a.d,
        model: b.model,
        lower: b.lower,
        upper: b.upper,
        p_star: fp.map(|f| f.p_star),
        mu: fp.map(|f| f.mu).or(b.lower.map(|l| -l)),
        r_e1: fp.map(|f| f.r_e1.mid()),
        r_error: fp.map(|f| f.r_e1.half_width()),
        bracket: fp.map(|f| f.bracket),
        certified: fp.map(|f| f.certified),
        method: fp.map(|f| f.method.clone()),
        warning: b.warning.clone(),
    };
    match config.format {
        Format::Json => to_json(&json!({ "config": config, "bounds": rec })),
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            let mut csv = Csv::default();
            csv.comment("config", &to_json_line(config)?);
            if let Some(w) = &rec.warning {
                csv.comment("warning", w);
            }
            csv.row(["lambda", "d", "model", "lower", "upper", "p_star", "mu", "r_e1", "r_error"]);
            csv.row([
                fmt_f64(rec.lambda),
                rec.d.to_string(),
                rec.model.name().to_string(),
                opt(rec.lower),
                fmt_f64(rec.upper),
                opt(rec.p_star),
                opt(rec.mu),
                opt(rec.r_e1),
                opt(rec.r_error),
            ]);
            Ok(csv.finish())
        }
    }
}

/// A simulated decay rate checked against the rigorous bounds.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatedRate {
    pub dim: usize,
    pub replicates: u64,
    pub fit: Fit,
    /// `lower - 3 se <= rate <= upper + 3 se`.
    pub in_sandwich: Option<bool>,
}

type Outcome = (String, Result<(), Error>);

fn theorem22(a: &Theorem22Args, config: &RunConfig) -> Result<Outcome, Error> {
    if a.dims.is_empty() {
        return Err(Error::Usage("--dims must list at least one dimension".into()));
    }
    if a.dims.contains(&0) {
        return Err(Error::Usage("dimensions must be at least 1".into()));
    }
    let opts = fixed_point_options(a.tol, &a.provider, a.seed)?;
    let m = model(&a.model)?;
    let scan = limit_scan(a.lambda, &a.dims, m, &opts)?;
    let times = parse_grid(&a.t_grid)?;
    let mut sims = Vec::new();
    if a.mc_reps > 0 {
        for row in scan.rows.iter().filter(|r| r.dim <= a.mc_max_dim) {
            let params = DualParams::new(m, row.dim, row.scaled_lambda, a.seed);
            let curve = run_dual_ensemble(&params, &times, a.mc_reps)?.survival_curve(crate::stats::Z95)?;
            let fit = decay_fits(&curve, None, None).regression;
            let in_sandwich = fit
                .estimate
                .as_ref()
                .map(|f| row.lower - 3.0 * f.se <= f.rate && f.rate <= row.upper + 3.0 * f.se);
            sims.push(SimulatedRate {
                dim: row.dim,
                replicates: a.mc_reps,
                fit,
                in_sandwich,
            });
        }
    }
    let violated: Vec<usize> = sims.iter().filter(|s| s.in_sandwich == Some(false)).map(|s| s.dim).collect();
    let text = match config.format {
        Format::Json => to_json(&json!({ "config": config, "scan": scan, "simulated": sims }))?,
        Format::Csv => {
            let mut csv = Csv::default();
            csv.comment("config", &to_json_line(config)?);
            csv.comment("limit_p", &fmt_f64(scan.limit_p));
            csv.comment("limit_rate", &fmt_f64(scan.limit_rate));
            csv.row([
                "d",
                "scaled_lambda",
                "p_star",
                "p_lo",
                "p_hi",
                "lower",
                "upper",
                "gap_to_limit_p",
                "gap_to_limit_rate",
                "mc_rate",
                "mc_se",
            ]);
            for r in &scan.rows {
                let sim = sims.iter().find(|s| s.dim == r.dim).and_then(|s| s.fit.estimate.as_ref());
                csv.row([
                    r.dim.to_string(),
                    fmt_f64(r.scaled_lambda),
                    fmt_f64(r.p_star),
                    fmt_f64(r.bracket.lo),
                    fmt_f64(r.bracket.hi),
                    fmt_f64(r.lower),
                    fmt_f64(r.upper),
                    fmt_f64(r.gap_to_limit_p),
                    fmt_f64(r.gap_to_limit_rate),
                    sim.map(|f| fmt_f64(f.rate)).unwrap_or_default(),
                    sim.map(|f| fmt_f64(f.se)).unwrap_or_default(),
                ]);
            }
            csv.finish()
        }
    };
    let outcome = if violated.is_empty() {
        Ok(())
    } else {
        Err(Error::Violation(format!(
            "simulated rate outside the bounds for d = {violated:?}"
        )))
    };
    Ok((text, outcome))
}

fn verify(a: &VerifyArgs, config: &RunConfig) -> Result<Outcome, Error> {
    if config.format != Format::Json {
        return Err(Error::Usage("verify writes JSON only".into()));
    }
    if a.reps == 0 || a.runs == 0 {
        return Err(Error::Usage("--reps and --runs must be at least 1".into()));
    }
    let mut cfg = VerifyConfig {
        model: model(&a.model)?,
        dim: a.d,
        lambda: a.lambda,
        side: a.side,
        t_max: a.t_max,
        runs: a.runs,
        replicates: a.reps,
        seed: a.seed,
        perturb_p: a.perturb_p,
    };
    if let Some(b) = a.budget {
        if !(b > 0.0) {
            return Err(Error::Usage("--budget must be positive".into()));
        }
        cfg = cfg.with_budget(b);
    }
    let report = run_suites(&a.suite, &cfg)?;
    let text = to_json(&json!({ "config": config, "effective": cfg, "report": report }))?;
    let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.suite.as_str()).collect();
    let outcome = if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Violation(format!("failed suites: {}", failed.join(", "))))
    };
    Ok((text, outcome))
}
