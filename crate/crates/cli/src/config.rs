//! Campaign configuration.
//!
//! A config is one JSON document. Every field except `seed` may be omitted
//! and falls back to the default campaign. A previously emitted report is
//! also accepted; its `config` member is used.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use subgauss_core::sim::DEFAULT_DRAW_BUDGET;
use subgauss_core::verify::{DEFAULT_A_POINTS, DEFAULT_S_POINTS};
use subgauss_core::{DistributionSpec, GeneratorSpec, MagnitudeRule, SubgaussianParams};

pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_N_PATHS: usize = 20_000;
pub const DEFAULT_SERIES_POINTS: usize = 50;
pub const DEFAULT_OUTPUT_DIR: &str = "subgauss-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// A distribution to verify and the envelope it is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionEntry {
    pub dist: DistributionSpec,
    /// Envelope under test; defaults to the distribution's declared params.
    #[serde(default)]
    pub params: Option<SubgaussianParams>,
    #[serde(default)]
    pub expect: Expect,
}

impl DistributionEntry {
    pub fn new(dist: DistributionSpec) -> Self {
        Self {
            dist,
            params: None,
            expect: Expect::Pass,
        }
    }

    pub fn params(&self) -> anyhow::Result<SubgaussianParams> {
        match self.params.or(self.dist.declared_params().copied()) {
            Some(p) => Ok(p),
            None => bail!(
                "{} declares no params; set `params` on the entry",
                self.label()
            ),
        }
    }

    pub fn label(&self) -> String {
        format!("{}(scale={})", self.dist.family().name(), self.dist.scale())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points of the tail-envelope grid on `(0, a_max]`.
    pub a_points: usize,
    /// Points of the log s-grid on `[1e-3 sqrt(c), 10 sqrt(c)]`.
    pub s_points: usize,
    /// Points per regime of the series checks.
    pub series_points: usize,
    /// `c` used by the series checks; only `c / s^2` matters.
    pub series_c: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            a_points: DEFAULT_A_POINTS,
            s_points: DEFAULT_S_POINTS,
            series_points: DEFAULT_SERIES_POINTS,
            series_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct CampaignConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub horizons: Vec<u64>,
    pub deltas: Vec<f64>,
    pub generators: Vec<GeneratorSpec>,
    pub distributions: Vec<DistributionEntry>,
    pub grids: GridConfig,
    pub budget: u64,
    /// Not echoed into reports, so output does not depend on where it is written.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    n_paths: Option<usize>,
    horizons: Option<Vec<u64>>,
    deltas: Option<Vec<f64>>,
    generators: Option<Vec<GeneratorSpec>>,
    distributions: Option<Vec<DistributionEntry>>,
    grids: Option<GridConfig>,
    budget: Option<u64>,
    output_dir: Option<PathBuf>,
}

impl TryFrom<RawConfig> for CampaignConfig {
    type Error = String;

    fn try_from(raw: RawConfig) -> Result<Self, String> {
        let d = CampaignConfig::default();
        Ok(Self {
            seed: raw.seed,
            n_paths: raw.n_paths.unwrap_or(d.n_paths),
            horizons: raw.horizons.unwrap_or(d.horizons),
            deltas: raw.deltas.unwrap_or(d.deltas),
            generators: raw.generators.unwrap_or(d.generators),
            distributions: raw.distributions.unwrap_or(d.distributions),
            grids: raw.grids.unwrap_or(d.grids),
            budget: raw.budget.unwrap_or(d.budget),
            output_dir: raw.output_dir,
        })
    }
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let gaussian = DistributionSpec::gaussian(1.0).expect("valid sigma");
        let laplace = DistributionSpec::laplace(1.0).expect("valid rate");
        Self {
            seed: DEFAULT_SEED,
            n_paths: DEFAULT_N_PATHS,
            horizons: vec![50, 200],
            deltas: vec![0.1, 0.01],
            generators: vec![
                GeneratorSpec::iid(gaussian).expect("valid generator"),
                GeneratorSpec::scaled_gaussian(0.5, 1.0).expect("valid generator"),
                GeneratorSpec::sign_flip(1.0, MagnitudeRule::Constant).expect("valid generator"),
            ],
            distributions: vec![
                DistributionEntry::new(gaussian),
                DistributionEntry::new(DistributionSpec::rademacher(1.0).expect("valid magnitude")),
                DistributionEntry::new(DistributionSpec::uniform(1.0).expect("valid half width")),
                DistributionEntry {
                    dist: laplace,
                    params: Some(SubgaussianParams::new(1.0, 1.0).expect("valid params")),
                    expect: Expect::Fail,
                },
            ],
            grids: GridConfig::default(),
            budget: DEFAULT_DRAW_BUDGET,
            output_dir: None,
        }
    }
}

impl CampaignConfig {
    /// Parse a config, or the `config` member of a report.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).context("config is not valid JSON")?;
        let is_report = value.get("version").is_some() && value.get("config").is_some();
        let inner = if is_report {
            value["config"].clone()
        } else {
            value
        };
        serde_json::from_value(inner).context("invalid config")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("--config: cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("--config {}", path.display()))
    }
}
