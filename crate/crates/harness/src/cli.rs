//! `filterlab` subcommands. Exit status: 0 success, 1 validation or engine
//! failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use filterlab::diagnostics::{
    compare_means, doob_decompose, martingale_orthogonality_check, KalmanPredictor,
    LastValuePredictor, OneStepPredictor,
};
use filterlab::io::NumericTable;
use filterlab::model::{simulate_ar1, simulate_local_level};
use filterlab::{Ar1Params, LocalLevelParams, ObservationSeries};

use crate::config::{load_config, Engine};
use crate::experiment::{run_experiment, sha256_hex, RunContext};

#[derive(Parser, Debug)]
#[command(name = "filterlab", version, about = "Filtering experiments on the local-level model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a series and write it as CSV (t,y,theta).
    Simulate(SimulateArgs),
    /// Run the Kalman and particle engines of a config.
    Filter(RunArgs),
    /// Run the Kalman and Gibbs engines of a config.
    Gibbs(RunArgs),
    /// Deviation metrics between two trace CSVs.
    Compare(CompareArgs),
    /// Doob decomposition of a series with a chosen one-step predictor.
    Doob(DoobArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    obs_var: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    state_var: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    prior_mean: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    prior_var: f64,
}

impl ModelArgs {
    fn params(&self) -> LocalLevelParams {
        LocalLevelParams {
            obs_var: self.obs_var,
            state_var: self.state_var,
            prior_mean: self.prior_mean,
            prior_var: self.prior_var,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Process {
    LocalLevel,
    Ar1,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of observations.
    #[arg(short = 'T', long)]
    horizon: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "local-level")]
    process: Process,
    /// AR(1) coefficient in y_t = (1 + alpha) y_{t-1} + e_t.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start_value: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    noise_var: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seed for engines or simulated data whose seed the config omits.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    /// Accepted for uniformity; comparison is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictorChoice {
    Kalman,
    Last,
}

#[derive(Args, Debug)]
struct DoobArgs {
    /// Series CSV with columns t,y.
    series: PathBuf,
    #[arg(long, value_enum, default_value = "kalman")]
    predictor: PredictorChoice,
    /// Constant added to every prediction.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    bias: f64,
    /// y_0 used for the first predicted change.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    baseline: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for uniformity; the decomposition is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

type Failure = Box<dyn std::error::Error>;

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Filter(a) => experiment(a, "filter"),
        Command::Gibbs(a) => experiment(a, "gibbs"),
        Command::Compare(a) => compare(a),
        Command::Doob(a) => doob(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<i32, Failure> {
    let seed = a.seed.ok_or("simulate: --seed is required")?;
    let series = match a.process {
        Process::LocalLevel => simulate_local_level(&a.model.params(), a.horizon, seed)?,
        Process::Ar1 => {
            let alpha = a.alpha.ok_or("simulate --process ar1: --alpha is required")?;
            let params = Ar1Params {
                alpha,
                start_value: a.start_value,
                noise_var: a.noise_var,
            };
            simulate_ar1(&params, a.horizon, seed)?
        }
    };
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    Ok(0)
}

fn experiment(a: RunArgs, subcommand: &str) -> Result<i32, Failure> {
    let mut config = load_config(&a.config, a.seed)?;
    if let Some(out) = a.out {
        config.output_dir = out;
    }
    let wanted = |e: &Engine| match e {
        Engine::Kalman => true,
        Engine::Particle(_) => subcommand == "filter",
        Engine::Gibbs(_) => subcommand == "gibbs",
    };
    for spec in config.engines.iter().filter(|s| !wanted(&s.engine)) {
        eprintln!("{subcommand}: skipping {} engine \"{}\"", spec.engine.kind(), spec.label);
    }
    config.engines.retain(|s| wanted(&s.engine));
    if config.engines.is_empty() {
        return Err(format!("{subcommand}: the config has no engines this subcommand runs").into());
    }
    let context = RunContext {
        config_file_sha256: Some(sha256_hex(&std::fs::read(&a.config)?)),
        cli_seed: a.seed,
    };
    let report = run_experiment(&config, &context)?;
    for e in &report.engines {
        if let Some(err) = &e.error {
            eprintln!("engine \"{}\" failed: {err}", e.label);
        }
    }
    println!("wrote {}", report.output_dir.join("summary.csv").display());
    Ok(if report.all_succeeded() { 0 } else { 1 })
}

/// Filtered means of a Kalman (`post_mean`) or particle (`mean`) trace, for t >= 1.
fn trace_means(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let table = NumericTable::from_path(path)?;
    let column = ["post_mean", "mean"]
        .into_iter()
        .find(|c| table.column_index(c).is_some())
        .ok_or_else(|| format!("{}: no post_mean or mean column", path.display()))?;
    let t = table.require_column("t")?;
    let m = table.require_column(column)?;
    Ok(t.into_iter().zip(m).filter(|(t, _)| *t >= 1.0).unzip())
}

fn compare(a: CompareArgs) -> Result<i32, Failure> {
    let (t1, m1) = trace_means(&a.first)?;
    let (t2, m2) = trace_means(&a.second)?;
    if t1 != t2 {
        return Err(format!(
            "{} and {} cover different time steps ({} vs {} rows)",
            a.first.display(),
            a.second.display(),
            t1.len(),
            t2.len()
        )
        .into());
    }
    let c = compare_means(&m1, &m2)?;
    println!("rmse={}\nmax_abs={}", c.rmse, c.max_abs);
    Ok(0)
}

fn doob(a: DoobArgs) -> Result<i32, Failure> {
    let series = ObservationSeries::read_csv(&a.series)?;
    let mut predictor: Box<dyn OneStepPredictor> = match a.predictor {
        PredictorChoice::Kalman => Box::new(KalmanPredictor::new(a.model.params())?),
        PredictorChoice::Last => Box::new(LastValuePredictor { baseline: a.baseline }),
    };
    let bias = a.bias;
    let mut biased = |history: &[f64]| predictor.predict(history) + bias;
    let d = doob_decompose(&series, &mut biased, a.baseline)?;
    let mut buf = Vec::new();
    d.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    if let Ok(c) = martingale_orthogonality_check(&d) {
        eprintln!(
            "mean_increment={} mean_se={} lag1_cov={} lag1_se={}",
            c.mean_increment, c.mean_se, c.lag1_cov, c.lag1_se
        );
    }
    Ok(0)
}
