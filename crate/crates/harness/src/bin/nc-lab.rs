use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nc_core::metrics::{LabeledFeatures, MetricSuite};
use nc_core::tensor::parse_labels;
use nc_core::theory::{
    coupled_signgd_run_with_decay, ode_trajectory, sgd_coupled_trajectory, sgd_decoupled_trajectory,
    signgd_decoupled_trajectory, OracleTrajectory,
};
use nc_core::DenseMatrix;
use nc_harness::error::{read_file, write_file};
use nc_harness::{
    check_theorem, emit_csv, emit_summary_json, records_to_csv, regress_csv, run_sweep, run_training,
    ExperimentConfig, HarnessError, SweepSpec, TheoremParams,
};

#[derive(Parser)]
#[command(name = "nc-lab", version, about = "Neural-collapse dynamics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its per-epoch metric log.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides the config's `output` key. Stdout if neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// JSON summary destination. Defaults to the CSV path with a .json extension.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run a hyperparameter grid in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sweep.output_dir`. Without either, the summary goes to stdout.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print a predicted alpha trajectory as `t,alpha_predicted`.
    Oracle(OracleArgs),
    /// Simulate and compare against the oracle; exits 2 when a tolerance fails.
    CheckTheorem(CheckArgs),
    /// Print every metric for a weight matrix and labeled features as JSON.
    Metrics {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Features to classify for NC4; the training features otherwise.
        #[arg(long)]
        test_features: Option<PathBuf>,
    },
    /// Fit y on x from a CSV and print the regression as JSON.
    Regress {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleTheorem {
    #[value(name = "1")]
    SgdDecoupled,
    #[value(name = "2")]
    SgdCoupled,
    #[value(name = "3")]
    SignGdDecoupled,
    #[value(name = "4")]
    SignGdCoupled,
    #[value(name = "ode")]
    Ode,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    theorem: OracleTheorem,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Initial row sums `W₀ᵀ𝟙` for theorem 2, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    m0: Vec<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    shrink: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// ODE sample spacing.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
}

#[derive(Args)]
struct CheckArgs {
    /// 1 to 4.
    theorem: u8,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    shrink: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Write the comparison CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

enum Outcome {
    Done,
    ToleranceFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ToleranceFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<Outcome, HarnessError> {
    match cmd {
        Command::Train {
            config,
            output,
            summary,
        } => train(&config, output, summary),
        Command::Sweep { config, output_dir } => sweep(&config, output_dir),
        Command::Oracle(args) => oracle(&args),
        Command::CheckTheorem(args) => check(&args),
        Command::Metrics {
            weights,
            features,
            labels,
            test_features,
        } => metrics(&weights, &features, &labels, test_features.as_deref()),
        Command::Regress { csv, x, y } => {
            let fit = regress_csv(&read_file(&csv)?, x.as_deref(), y.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(Outcome::Done)
        }
    }
}

fn train(config: &Path, output: Option<PathBuf>, summary: Option<PathBuf>) -> Result<Outcome, HarnessError> {
    let mut cfg = ExperimentConfig::parse(&read_file(config)?)?;
    if output.is_some() {
        cfg.output = output;
    }
    let run = run_training(&cfg)?;
    match &cfg.output {
        Some(path) => emit_csv(&run.records, path)?,
        None => print!("{}", records_to_csv(&run.records)),
    }
    let summary = summary.or_else(|| cfg.output.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = summary {
        emit_summary_json(&run, &path)?;
    }
    eprintln!(
        "{}: {} epochs, {} steps in {:.2}s",
        run.status.label(),
        cfg.epochs,
        run.steps,
        run.wall_time_secs
    );
    Ok(Outcome::Done)
}

fn sweep(config: &Path, output_dir: Option<PathBuf>) -> Result<Outcome, HarnessError> {
    let mut spec = SweepSpec::parse(&read_file(config)?)?;
    if output_dir.is_some() {
        spec.output_dir = output_dir;
    }
    let out = run_sweep(&spec)?;
    match &spec.output_dir {
        Some(dir) => out.write(dir)?,
        None => print!("{}", out.summary_csv()),
    }
    eprintln!("{} runs, {} kept", out.rows.len(), out.kept().count());
    Ok(Outcome::Done)
}

fn oracle(a: &OracleArgs) -> Result<Outcome, HarnessError> {
    let tr: OracleTrajectory = match a.theorem {
        OracleTheorem::SgdDecoupled => sgd_decoupled_trajectory(
            a.alpha0,
            a.eta.unwrap_or(0.05),
            a.lambda.unwrap_or(0.1),
            a.steps.unwrap_or(300),
        ),
        OracleTheorem::SgdCoupled => {
            let m0 = if a.m0.is_empty() { vec![1.0] } else { a.m0.clone() };
            sgd_coupled_trajectory(
                &m0,
                a.k.unwrap_or(4),
                a.eta.unwrap_or(0.05),
                a.beta.unwrap_or(0.9),
                a.lambda.unwrap_or(0.1),
                a.steps.unwrap_or(300),
            )
        }
        OracleTheorem::SignGdDecoupled => signgd_decoupled_trajectory(
            a.k.unwrap_or(10),
            a.eta.unwrap_or(0.1),
            a.lambda.unwrap_or(0.5),
            a.steps.unwrap_or(2000),
        )?,
        OracleTheorem::SignGdCoupled => {
            let k = a.k.unwrap_or(10);
            let budget = a.steps.unwrap_or(100_000) as usize;
            match coupled_signgd_run_with_decay(k, k, a.eta.unwrap_or(0.1), a.lambda.unwrap_or(0.5), a.shrink, a.tol, budget) {
                Ok(run) => run.trajectory,
                Err(nc_core::Error::Timeout { budget, partial }) => {
                    print!("{}", partial.to_csv());
                    return Err(nc_core::Error::Timeout { budget, partial }.into());
                }
                Err(e) => return Err(e.into()),
            }
        }
        OracleTheorem::Ode => ode_trajectory(
            a.alpha0,
            a.lambda.unwrap_or(0.002),
            a.beta.unwrap_or(0.9),
            a.dt,
            a.steps.unwrap_or(500),
        )?,
    };
    print!("{}", tr.to_csv());
    Ok(Outcome::Done)
}

fn check(a: &CheckArgs) -> Result<Outcome, HarnessError> {
    let mut p = TheoremParams::defaults(a.theorem)?;
    p.k = a.k.unwrap_or(p.k);
    p.eta = a.eta.unwrap_or(p.eta);
    p.lambda = a.lambda.unwrap_or(p.lambda);
    p.beta = a.beta.unwrap_or(p.beta);
    p.steps = a.steps.unwrap_or(p.steps);
    p.seed = a.seed.unwrap_or(p.seed);
    p.data_seed = a.data_seed.unwrap_or(p.data_seed);
    p.shrink = a.shrink.unwrap_or(p.shrink);
    p.tol = a.tol.unwrap_or(p.tol);
    p.rel_tol = a.rel_tol.unwrap_or(p.rel_tol);
    let result = check_theorem(a.theorem, &p)?;
    match &a.output {
        Some(path) => write_file(path, &result.to_csv())?,
        None => print!("{}", result.to_csv()),
    }
    for c in &result.checks {
        eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if result.passed() {
        Outcome::Done
    } else {
        Outcome::ToleranceFailed
    })
}

fn metrics(weights: &Path, features: &Path, labels: &Path, test: Option<&Path>) -> Result<Outcome, HarnessError> {
    let w = DenseMatrix::from_text(&read_file(weights)?)?;
    let h = DenseMatrix::from_text(&read_file(features)?)?;
    let labels = parse_labels(&read_file(labels)?)?;
    let test = test.map(|p| -> Result<DenseMatrix, HarnessError> {
        Ok(DenseMatrix::from_text(&read_file(p)?)?)
    });
    let test = test.transpose()?;
    let data = LabeledFeatures::new(h, labels, w.rows())?;
    let suite = MetricSuite::compute(&w, &data, test.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&suite)?);
    Ok(Outcome::Done)
}
