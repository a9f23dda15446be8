//! Report sections and their computation.

use std::io::Write;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;
use subgauss_core::bounds::{
    classic_azuma_epsilon, subgaussian_epsilon, DEVIATION_CONSTANT, MGF_CONSTANT,
};
use subgauss_core::sim::{tightness_from_summary, validate_summary};
use subgauss_core::verify::{self, LogGrid, VerificationReport};
use subgauss_core::{
    DistributionSpec, Error, GeneratorSpec, SimulationSummary, Simulator, SubgaussianParams,
};

use crate::config::{CampaignConfig, DistributionEntry, Expect};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_COLUMNS: [&str; 13] = [
    "generator",
    "T",
    "delta",
    "b",
    "c",
    "epsilon_theorem",
    "epsilon_classic",
    "upper_violations",
    "lower_violations",
    "n_paths",
    "empirical_quantile",
    "tightness_ratio",
    "seed",
];

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub version: &'static str,
    pub config: &'a CampaignConfig,
    pub bounds: Option<Vec<BoundRow>>,
    pub verification: Option<Verification>,
    pub simulation: Option<Simulation>,
}

impl<'a> Report<'a> {
    pub fn new(config: &'a CampaignConfig) -> Self {
        Self {
            version: VERSION,
            config,
            bounds: None,
            verification: None,
            simulation: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Subgaussian and classic epsilons for one generator and grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub generator: String,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub delta: f64,
    pub epsilon_theorem: f64,
    pub epsilon_classic: Option<f64>,
}

pub fn bound_table(config: &CampaignConfig) -> anyhow::Result<Vec<BoundRow>> {
    require_nonempty(config)?;
    let mut rows = Vec::new();
    for gen in &config.generators {
        let p = gen.declared_params();
        for &horizon in &config.horizons {
            for &delta in &config.deltas {
                rows.push(BoundRow {
                    generator: gen.label(),
                    b: p.b(),
                    c: p.c(),
                    horizon,
                    delta,
                    epsilon_theorem: subgaussian_epsilon(p, horizon, delta)?,
                    epsilon_classic: gen
                        .hard_bound()
                        .map(|m| classic_azuma_epsilon(m, horizon, delta))
                        .transpose()?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionOutcome {
    pub label: String,
    pub dist: DistributionSpec,
    pub params: SubgaussianParams,
    pub expect: Expect,
    pub checks: Vec<VerificationReport>,
    /// Whether every check passed.
    pub holds: bool,
    pub as_expected: bool,
    /// Smallest constant that can replace 7 on the s-grid.
    pub tightened_constant: Option<f64>,
    /// Deviation constant implied by the tightened constant (replaces 28).
    pub implied_deviation_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub distributions: Vec<DistributionOutcome>,
    pub proof_steps: Vec<VerificationReport>,
    pub pass: bool,
}

impl Verification {
    /// Description of the first unexpected outcome, if any.
    pub fn first_failure(&self) -> Option<String> {
        for d in &self.distributions {
            if d.as_expected {
                continue;
            }
            if d.expect == Expect::Fail {
                return Some(format!(
                    "{} with (b={}, c={}) was expected to fail but every check passed",
                    d.label,
                    d.params.b(),
                    d.params.c()
                ));
            }
            let failed = d.checks.iter().find(|r| !r.pass);
            return Some(match failed {
                Some(r) => format!(
                    "{} with (b={}, c={}): check {} failed (margin {} > limit {} at {})",
                    d.label,
                    d.params.b(),
                    d.params.c(),
                    r.check,
                    r.worst_margin,
                    r.limit,
                    describe_point(r)
                ),
                None => format!("{}: not a subgaussian family", d.label),
            });
        }
        self.proof_steps.iter().find(|r| !r.pass).map(|r| {
            format!(
                "check {} failed (margin {} > limit {} at {})",
                r.check,
                r.worst_margin,
                r.limit,
                describe_point(r)
            )
        })
    }
}

fn describe_point(r: &VerificationReport) -> String {
    let mut point: Vec<String> = r
        .worst_point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    if let Some(a) = r.details.get("first_failure_a") {
        point.push(format!("first failure a={a}"));
    }
    point.join(", ")
}

fn s_grid(config: &CampaignConfig, params: &SubgaussianParams) -> anyhow::Result<LogGrid> {
    let root = params.c().sqrt();
    Ok(LogGrid::new(
        verify::S_GRID_MIN_FACTOR * root,
        verify::S_GRID_MAX_FACTOR * root,
        config.grids.s_points,
    )?)
}

fn verify_entry(
    config: &CampaignConfig,
    entry: &DistributionEntry,
) -> anyhow::Result<DistributionOutcome> {
    let dist = entry.dist;
    let params = entry.params()?;
    if config.grids.a_points == 0 {
        return Err(Error::EmptyGrid("grids.a_points is 0").into());
    }
    let tail = verify::tail_envelope_check(
        &dist,
        &params,
        verify::precondition_a_max(&dist, &params),
        config.grids.a_points,
    )?;
    let mut checks = vec![tail.clone()];
    let mut constant = None;
    if tail.pass && dist.is_subgaussian() {
        let grid = s_grid(config, &params)?;
        checks.push(verify::verify_mgf_lemma(&dist, &params, &grid)?);
        checks.push(verify::second_moment_check(&dist, &params)?);
        constant = Some(verify::tighten_constant(&dist, &params, &grid)?);
    }
    let holds = dist.is_subgaussian() && checks.iter().all(|r| r.pass);
    Ok(DistributionOutcome {
        label: entry.label(),
        dist,
        params,
        expect: entry.expect,
        checks,
        holds,
        as_expected: holds == (entry.expect == Expect::Pass),
        tightened_constant: constant,
        implied_deviation_constant: constant.map(|k| k * DEVIATION_CONSTANT / MGF_CONSTANT),
    })
}

pub fn verification(config: &CampaignConfig) -> anyhow::Result<Verification> {
    if config.distributions.is_empty() {
        return Err(Error::EmptyGrid("the config lists no distributions").into());
    }
    let distributions = config
        .distributions
        .iter()
        .map(|e| verify_entry(config, e).with_context(|| format!("verifying {}", e.label())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (small, large) =
        verify::verify_series_grids(config.grids.series_c, config.grids.series_points)?;
    let scalar = verify::verify_scalar_grid(&verify::scalar_a_grid(), &verify::SCALAR_B_GRID)?;
    let proof_steps = vec![small, large, scalar];
    let pass = distributions.iter().all(|d| d.as_expected) && proof_steps.iter().all(|r| r.pass);
    Ok(Verification {
        distributions,
        proof_steps,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightenRow {
    pub label: String,
    pub b: f64,
    pub c: f64,
    pub constant: f64,
    pub implied_deviation_constant: f64,
}

/// Tightened constants for every expected-pass distribution.
pub fn tighten(config: &CampaignConfig) -> anyhow::Result<Vec<TightenRow>> {
    let entries: Vec<_> = config
        .distributions
        .iter()
        .filter(|e| e.expect == Expect::Pass)
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyGrid("the config lists no expected-pass distributions").into());
    }
    entries
        .into_iter()
        .map(|e| {
            let params = e.params()?;
            let grid = s_grid(config, &params)?;
            let k = verify::tighten_constant(&e.dist, &params, &grid)
                .with_context(|| format!("tightening {}", e.label()))?;
            Ok(TightenRow {
                label: e.label(),
                b: params.b(),
                c: params.c(),
                constant: k,
                implied_deviation_constant: k * DEVIATION_CONSTANT / MGF_CONSTANT,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub generator: String,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub delta: f64,
    pub b: f64,
    pub c: f64,
    pub epsilon_theorem: f64,
    pub epsilon_classic: Option<f64>,
    pub upper_violations: u64,
    pub lower_violations: u64,
    pub n_paths: usize,
    pub empirical_quantile: f64,
    /// Absent when the ratio is undefined (zero-variance generator or a
    /// non-positive quantile).
    pub tightness_ratio: Option<f64>,
    pub seed: u64,
    pub pass: bool,
}

impl CellRow {
    fn csv_record(&self) -> [String; 13] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.generator.clone(),
            self.horizon.to_string(),
            self.delta.to_string(),
            self.b.to_string(),
            self.c.to_string(),
            self.epsilon_theorem.to_string(),
            opt(self.epsilon_classic),
            self.upper_violations.to_string(),
            self.lower_violations.to_string(),
            self.n_paths.to_string(),
            self.empirical_quantile.to_string(),
            opt(self.tightness_ratio),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub cells: Vec<CellRow>,
    pub pass: bool,
}

impl Simulation {
    pub fn first_failure(&self) -> Option<String> {
        self.cells.iter().find(|c| !c.pass).map(|c| {
            format!(
                "cell {} T={} delta={} failed: {} upper and {} lower violations out of {} paths",
                c.generator, c.horizon, c.delta, c.upper_violations, c.lower_violations, c.n_paths
            )
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for cell in &self.cells {
            w.write_record(cell.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Path-mean sample of one `(generator, T)` pair.
#[derive(Debug)]
pub struct PathSample {
    pub generator: GeneratorSpec,
    pub summary: SimulationSummary,
}

fn require_nonempty(config: &CampaignConfig) -> anyhow::Result<()> {
    if config.generators.is_empty() {
        bail!(Error::EmptyGrid("the config lists no generators"));
    }
    if config.horizons.is_empty() {
        bail!(Error::EmptyGrid("the config lists no horizons"));
    }
    if config.deltas.is_empty() {
        bail!(Error::EmptyGrid("the config lists no deltas"));
    }
    Ok(())
}

/// Run every `(generator, T, delta)` cell. Cells that share `(generator, T)`
/// share one simulation with the master seed. Work runs on the current rayon
/// pool; the result does not depend on its size.
pub fn simulation(config: &CampaignConfig) -> anyhow::Result<(Simulation, Vec<PathSample>)> {
    require_nonempty(config)?;
    for &delta in &config.deltas {
        // fail fast, before any simulation
        subgaussian_epsilon(config.generators[0].declared_params(), 1, delta)?;
    }
    let sim = Simulator::default().with_budget(config.budget);
    let pairs: Vec<(GeneratorSpec, u64)> = config
        .generators
        .iter()
        .flat_map(|g| config.horizons.iter().map(move |&t| (*g, t)))
        .collect();
    let samples = pairs
        .par_iter()
        .map(|&(generator, t)| {
            let summary = sim.generate_paths(&generator, t, config.n_paths, config.seed)?;
            Ok(PathSample { generator, summary })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for sample in &samples {
        let gen = &sample.generator;
        let summary = &sample.summary;
        let p = gen.declared_params();
        for &delta in &config.deltas {
            let report = validate_summary(gen, summary, delta)?;
            let ratio = match tightness_from_summary(gen, summary, delta) {
                Ok(r) => Some(r),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e.into()),
            };
            cells.push(CellRow {
                generator: gen.label(),
                horizon: summary.horizon,
                delta,
                b: p.b(),
                c: p.c(),
                epsilon_theorem: report.details["epsilon"],
                epsilon_classic: gen
                    .hard_bound()
                    .map(|m| classic_azuma_epsilon(m, summary.horizon, delta))
                    .transpose()?,
                upper_violations: report.details["upper_violations"] as u64,
                lower_violations: report.details["lower_violations"] as u64,
                n_paths: summary.n_paths,
                empirical_quantile: summary.quantile(1.0 - delta)?,
                tightness_ratio: ratio,
                seed: summary.seed,
                pass: report.pass,
            });
        }
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok((Simulation { cells, pass }, samples))
}
