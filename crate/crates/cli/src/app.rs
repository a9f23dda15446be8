//! Argument parsing and command dispatch.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use subgauss_core::bounds::{classic_azuma_epsilon, params_from_bound, subgaussian_epsilon};
use subgauss_core::{DeviationQuery, Error, SubgaussianParams};

use crate::config::{CampaignConfig, DEFAULT_OUTPUT_DIR};
use crate::output::{self, write_atomic};
use crate::report::{self, Report};

const PRECEDENCE: &str = "\
Settings are resolved as: command-line flags > config file (--config) > built-in defaults.
The output directory is resolved as: --out > $SUBGAUSS_OUT_DIR > config `output_dir` > ./subgauss-out.
A report written by this tool is itself a valid --config.";

#[derive(Debug, Parser)]
#[command(name = "subgauss", version, about = "Deviation bounds for martingales with subgaussian increments", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the deviation bound for the one unknown among T, delta and epsilon.
    Bounds(BoundsArgs),
    /// Run the envelope, MGF, moment and proof-step checks; writes report.json.
    Verify(RunArgs),
    /// Simulate every (generator, T, delta) cell; writes simulation.csv and report.json.
    Simulate(SimulateArgs),
    /// Print the smallest MGF constant for each distribution and the implied deviation constant.
    Tighten(RunArgs),
    /// Run bounds, verification and simulation from one config.
    Campaign(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Envelope prefactor b (>= 1). Defaults to 1 when --c is given.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Envelope rate c (> 0). Optional when --bound-B is given.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Horizon.
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<u64>,
    /// Failure probability, in (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Deviation threshold of the average.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Almost-sure bound on the increments; adds the classic Azuma epsilon.
    /// Without --c the envelope is derived from it as (e, 1/B^2).
    #[arg(long = "bound-B", value_name = "B", allow_negative_numbers = true)]
    pub bound: Option<f64>,
    /// Machine-readable output instead of a table.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config, or a report produced by this tool.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SUBGAUSS_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict output to one format (default: every format the command supports).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Single horizon replacing the config's list.
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<u64>,
    /// Single delta replacing the config's list.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Paths per cell; overrides the config.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Also write each (generator, T) sample of path means as CSV under paths/.
    #[arg(long)]
    pub dump_paths: bool,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A check or cell failed; the message names the first one.
    Failed(String),
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Bounds(args) => bounds(&args),
        Command::Verify(args) => {
            let config = resolve(&args, None)?;
            with_pool(args.jobs, || verify(&args, &config))?
        }
        Command::Tighten(args) => {
            let config = resolve(&args, None)?;
            with_pool(args.jobs, || tighten(&args, &config))?
        }
        Command::Simulate(args) => {
            let config = resolve(&args.run, Some(&args))?;
            with_pool(args.run.jobs, || campaign(&args, &config, false))?
        }
        Command::Campaign(args) => {
            let config = resolve(&args.run, Some(&args))?;
            with_pool(args.run.jobs, || campaign(&args, &config, true))?
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs: must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("--jobs: cannot start worker threads")?;
            Ok(pool.install(f))
        }
    }
}

fn flag_for(arg: &str) -> Option<&'static str> {
    Some(match arg {
        "b" => "--b",
        "c" => "--c",
        "T" => "--T",
        "delta" => "--delta",
        "epsilon" => "--epsilon",
        "bound_B" => "--bound-B",
        _ => return None,
    })
}

/// Prefix domain errors with the flag that supplied the bad value.
fn flag_error(e: Error) -> anyhow::Error {
    match e.argument().and_then(flag_for) {
        Some(flag) => anyhow!("{flag}: {e}"),
        None => e.into(),
    }
}

#[derive(Debug, Serialize)]
struct BoundsOutput {
    b: f64,
    c: f64,
    #[serde(rename = "T")]
    horizon: u64,
    delta: f64,
    epsilon: f64,
    /// Threshold the theorem gives at (T, delta) when all three were supplied.
    epsilon_theorem: f64,
    bound_b: Option<f64>,
    epsilon_classic: Option<f64>,
}

fn bounds(args: &BoundsArgs) -> anyhow::Result<Outcome> {
    let params = match (args.b, args.c, args.bound) {
        (b, Some(c), _) => SubgaussianParams::new(b.unwrap_or(1.0), c).map_err(flag_error)?,
        (None, None, Some(bound)) => params_from_bound(bound).map_err(flag_error)?,
        _ => bail!("--c: required unless only --bound-B is given"),
    };
    let query =
        DeviationQuery::new(args.horizon, args.delta, args.epsilon).map_err(|e| match e {
            Error::Precondition(_) => anyhow!("give at least two of --T, --delta, --epsilon"),
            e => flag_error(e),
        })?;
    let solved = query.solve(&params).map_err(flag_error)?;
    let epsilon_theorem =
        subgaussian_epsilon(&params, solved.horizon, solved.delta).map_err(flag_error)?;
    let epsilon_classic = args
        .bound
        .map(|m| classic_azuma_epsilon(m, solved.horizon, solved.delta))
        .transpose()
        .map_err(flag_error)?;
    let out = BoundsOutput {
        b: params.b(),
        c: params.c(),
        horizon: solved.horizon,
        delta: solved.delta,
        epsilon: solved.epsilon,
        epsilon_theorem,
        bound_b: args.bound,
        epsilon_classic,
    };
    match args.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&out)?),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(&out)?;
            w.flush()?;
        }
        None => {
            println!("b = {:.6}", out.b);
            println!("c = {:.6}", out.c);
            println!("T = {}", out.horizon);
            println!("delta = {:.6}", out.delta);
            println!("epsilon = {:.6}", out.epsilon);
            if args.horizon.is_some() && args.delta.is_some() && args.epsilon.is_some() {
                println!("epsilon_theorem = {:.6}", epsilon_theorem);
            }
            if let Some(classic) = epsilon_classic {
                println!("epsilon_classic = {classic:.6}");
                println!("ratio = {:.6}", epsilon_theorem / classic);
            }
        }
    }
    // A supplied epsilon below what the theorem guarantees is not a valid statement.
    if args.horizon.is_some()
        && args.delta.is_some()
        && args.epsilon.is_some()
        && out.epsilon < epsilon_theorem
    {
        return Ok(Outcome::Failed(format!(
            "--epsilon {} is below the guaranteed {} at T={} and delta={}",
            out.epsilon, epsilon_theorem, out.horizon, out.delta
        )));
    }
    Ok(Outcome::Success)
}

fn resolve(args: &RunArgs, sim: Option<&SimulateArgs>) -> anyhow::Result<CampaignConfig> {
    let mut config = match &args.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(sim) = sim {
        if let Some(t) = sim.horizon {
            if t == 0 {
                bail!("--T: must be at least 1");
            }
            config.horizons = vec![t];
        }
        if let Some(d) = sim.delta {
            if !(d > 0.0 && d < 1.0) {
                bail!("--delta: {d} is out of domain: expected 0 < delta < 1");
            }
            config.deltas = vec![d];
        }
        if let Some(n) = sim.n_paths {
            if n == 0 {
                bail!("--n-paths: must be at least 1");
            }
            config.n_paths = n;
        }
    }
    Ok(config)
}

fn output_dir(args: &RunArgs, config: &CampaignConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn verify(args: &RunArgs, config: &CampaignConfig) -> anyhow::Result<Outcome> {
    if args.format == Some(Format::Csv) {
        bail!("--format: verify writes JSON only");
    }
    let verification = report::verification(config)?;
    print!("{}", output::verification_table(&verification));
    let failure = verification.first_failure();
    let mut report = Report::new(config);
    report.verification = Some(verification);
    wrote(&write_atomic(
        &output_dir(args, config),
        "report.json",
        report.to_json().as_bytes(),
    )?);
    Ok(failure.map_or(Outcome::Success, Outcome::Failed))
}

fn tighten(args: &RunArgs, config: &CampaignConfig) -> anyhow::Result<Outcome> {
    let rows = report::tighten(config)?;
    match args.format {
        Some(Format::Json) => println!("{}", serde_json::to_string_pretty(&rows)?),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        None => print!("{}", output::tighten_table(&rows)),
    }
    Ok(Outcome::Success)
}

fn campaign(
    args: &SimulateArgs,
    config: &CampaignConfig,
    with_verification: bool,
) -> anyhow::Result<Outcome> {
    let dir = output_dir(&args.run, config);
    let mut report = Report::new(config);
    let bounds = report::bound_table(config)?;
    print!("{}", output::bound_rows_table(&bounds));
    println!();
    report.bounds = Some(bounds);
    let mut failure = None;
    if with_verification {
        let verification = report::verification(config)?;
        print!("{}", output::verification_table(&verification));
        println!();
        failure = verification.first_failure();
        report.verification = Some(verification);
    }
    let (simulation, samples) = report::simulation(config)?;
    print!("{}", output::simulation_table(&simulation));
    failure = failure.or_else(|| simulation.first_failure());

    if args.run.format != Some(Format::Json) {
        let mut csv = Vec::new();
        simulation.write_csv(&mut csv)?;
        wrote(&write_atomic(&dir, "simulation.csv", &csv)?);
    }
    report.simulation = Some(simulation);
    if args.run.format != Some(Format::Csv) {
        wrote(&write_atomic(
            &dir,
            "report.json",
            report.to_json().as_bytes(),
        )?);
    }
    if args.dump_paths {
        let paths_dir = dir.join("paths");
        for s in &samples {
            let mut buf = Vec::new();
            s.summary.write_csv(&mut buf)?;
            let name = format!(
                "{}_T{}.csv",
                output::slug(&s.generator.label()),
                s.summary.horizon
            );
            wrote(&write_atomic(&paths_dir, &name, &buf)?);
        }
    }
    Ok(failure.map_or(Outcome::Success, Outcome::Failed))
}
