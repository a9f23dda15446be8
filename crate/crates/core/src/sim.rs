//! Monte-Carlo validation of the deviation bound.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::subgaussian_epsilon;
use crate::error::{check_delta, check_horizon, Error, Result};
use crate::generator::{GeneratorSpec, MarkovState};
use crate::rng::{path_rng, AUXILIARY_STREAM};
use crate::verify::VerificationReport;

/// Default cap on `n_paths * T`.
pub const DEFAULT_DRAW_BUDGET: u64 = 1_000_000_000;
/// Standard deviations of binomial slack allowed on violation rates.
pub const VIOLATION_SLACK_SIGMAS: f64 = 3.0;
/// Standard errors allowed on a conditional mean.
pub const CONDITIONAL_MEAN_SIGMAS: f64 = 4.0;

/// Time averages `(1/T) sum Z_t` of independent paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub horizon: u64,
    pub seed: u64,
    /// In path-index order.
    pub path_means: Vec<f64>,
    sorted: Vec<f64>,
}

/// Serializable digest of a [`SimulationSummary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n_paths: usize,
    pub horizon: u64,
    pub seed: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub quantiles: BTreeMap<String, f64>,
}

impl SimulationSummary {
    pub fn new(horizon: u64, seed: u64, path_means: Vec<f64>) -> Self {
        let mut sorted = path_means.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            n_paths: path_means.len(),
            horizon,
            seed,
            path_means,
            sorted,
        }
    }

    /// Paths with mean strictly above `epsilon` and strictly below `-epsilon`.
    pub fn violations(&self, epsilon: f64) -> (usize, usize) {
        let upper = self.sorted.len() - self.sorted.partition_point(|&m| m <= epsilon);
        let lower = self.sorted.partition_point(|&m| m < -epsilon);
        (upper, lower)
    }

    /// Lower empirical quantile: the `ceil(level * n)`-th smallest mean.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::domain("level", level, "0 < level <= 1"));
        }
        let n = self.sorted.len();
        if n == 0 {
            return Err(Error::EmptyGrid("no paths"));
        }
        let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.sorted[rank - 1])
    }

    pub fn mean(&self) -> f64 {
        self.path_means.iter().sum::<f64>() / self.n_paths as f64
    }

    pub fn stats(&self, levels: &[f64]) -> Result<SummaryStats> {
        let mean = self.mean();
        let var = self
            .path_means
            .iter()
            .map(|m| (m - mean).powi(2))
            .sum::<f64>()
            / (self.n_paths.saturating_sub(1).max(1)) as f64;
        let quantiles = levels
            .iter()
            .map(|&q| Ok((format!("{q}"), self.quantile(q)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(SummaryStats {
            n_paths: self.n_paths,
            horizon: self.horizon,
            seed: self.seed,
            mean,
            std_dev: var.sqrt(),
            min: self.sorted.first().copied().unwrap_or(f64::NAN),
            max: self.sorted.last().copied().unwrap_or(f64::NAN),
            quantiles,
        })
    }

    /// Single-column CSV with header `path_mean`, in path order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "path_mean")?;
        for m in &self.path_means {
            writeln!(out, "{m}")?;
        }
        Ok(())
    }
}

/// Runs paths under a draw budget, optionally on a fixed number of workers.
/// Results never depend on the worker count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulator {
    pub budget: u64,
    pub jobs: Option<usize>,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            budget: DEFAULT_DRAW_BUDGET,
            jobs: None,
        }
    }
}

fn simulate_path(gen: &GeneratorSpec, horizon: u64, seed: u64, index: u64) -> f64 {
    let mut rng = path_rng(seed, index);
    let mut state = gen.initial_state();
    let mut sum = 0.0;
    for _ in 0..horizon {
        sum += gen.step(&mut state, &mut rng);
    }
    sum / horizon as f64
}

impl Simulator {
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_jobs(mut self, jobs: Option<usize>) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn generate_paths(
        &self,
        gen: &GeneratorSpec,
        horizon: u64,
        n_paths: usize,
        seed: u64,
    ) -> Result<SimulationSummary> {
        check_horizon(horizon)?;
        if n_paths == 0 {
            return Err(Error::domain("n_paths", 0.0, "n_paths >= 1"));
        }
        let requested = n_paths as u128 * horizon as u128;
        if requested > self.budget as u128 {
            return Err(Error::Budget {
                requested,
                budget: self.budget,
            });
        }
        let run = || -> Vec<f64> {
            (0..n_paths as u64)
                .into_par_iter()
                .map(|i| simulate_path(gen, horizon, seed, i))
                .collect()
        };
        let means = match self.jobs {
            Some(1) => (0..n_paths as u64)
                .map(|i| simulate_path(gen, horizon, seed, i))
                .collect(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Precondition(format!("cannot start {n} workers: {e}")))?
                .install(run),
            None => run(),
        };
        Ok(SimulationSummary::new(horizon, seed, means))
    }

    pub fn validate_bound(
        &self,
        gen: &GeneratorSpec,
        horizon: u64,
        delta: f64,
        n_paths: usize,
        seed: u64,
    ) -> Result<VerificationReport> {
        check_delta(delta)?;
        let summary = self.generate_paths(gen, horizon, n_paths, seed)?;
        validate_summary(gen, &summary, delta)
    }

    pub fn tightness(
        &self,
        gen: &GeneratorSpec,
        horizon: u64,
        delta: f64,
        n_paths: usize,
        seed: u64,
    ) -> Result<f64> {
        check_delta(delta)?;
        if gen.is_degenerate() {
            return Err(degenerate(gen));
        }
        let summary = self.generate_paths(gen, horizon, n_paths, seed)?;
        tightness_from_summary(gen, &summary, delta)
    }
}

/// Violation-rate check of the deviation bound on an existing sample.
///
/// Upper (`mean > eps`) and lower (`mean < -eps`) violations are counted
/// separately; the lower tail is covered because the envelope is two-sided.
/// Passes iff each rate is at most `delta + 3 sqrt(delta (1 - delta) / n)`.
pub fn validate_summary(
    gen: &GeneratorSpec,
    summary: &SimulationSummary,
    delta: f64,
) -> Result<VerificationReport> {
    check_delta(delta)?;
    let epsilon = subgaussian_epsilon(gen.declared_params(), summary.horizon, delta)?;
    let (upper, lower) = summary.violations(epsilon);
    let n = summary.n_paths as f64;
    let (upper_rate, lower_rate) = (upper as f64 / n, lower as f64 / n);
    let limit = delta + VIOLATION_SLACK_SIGMAS * (delta * (1.0 - delta) / n).sqrt();
    let worst_point = [
        ("T".to_string(), summary.horizon as f64),
        ("delta".to_string(), delta),
    ]
    .into_iter()
    .collect();
    Ok(VerificationReport::new(
        "deviation_bound",
        upper_rate.max(lower_rate),
        limit,
        worst_point,
        format!("{} paths, seed {}", summary.n_paths, summary.seed),
    )
    .with_detail("epsilon", epsilon)
    .with_detail("upper_violations", upper as f64)
    .with_detail("lower_violations", lower as f64)
    .with_detail("upper_rate", upper_rate)
    .with_detail("lower_rate", lower_rate))
}

/// `epsilon / q`, where `q` is the empirical `(1 - delta)`-quantile of path means.
pub fn tightness_from_summary(
    gen: &GeneratorSpec,
    summary: &SimulationSummary,
    delta: f64,
) -> Result<f64> {
    if gen.is_degenerate() {
        return Err(degenerate(gen));
    }
    let epsilon = subgaussian_epsilon(gen.declared_params(), summary.horizon, delta)?;
    let q = summary.quantile(1.0 - delta)?;
    if q <= 0.0 {
        return Err(Error::Degenerate(format!(
            "empirical {}-quantile is {q}; the ratio is undefined",
            1.0 - delta
        )));
    }
    Ok(epsilon / q)
}

fn degenerate(gen: &GeneratorSpec) -> Error {
    Error::Degenerate(format!(
        "{} has zero variance; tightness is undefined",
        gen.label()
    ))
}

/// Monte-Carlo estimate of `E[Z_{t+1} | state]`; passes iff it lies within
/// `4 sd / sqrt(n)` of zero.
pub fn conditional_mean_check(
    gen: &GeneratorSpec,
    state: &MarkovState,
    n_samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    gen.check_state(state)?;
    if n_samples < 2 {
        return Err(Error::domain(
            "n_samples",
            n_samples as f64,
            "n_samples >= 2",
        ));
    }
    let mut rng = path_rng(seed, AUXILIARY_STREAM);
    let draws: Vec<f64> = (0..n_samples)
        .map(|_| {
            let mut s = *state;
            gen.step(&mut s, &mut rng)
        })
        .collect();
    let n = n_samples as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let tolerance = CONDITIONAL_MEAN_SIGMAS * sd / n.sqrt();
    let margin = if mean == 0.0 {
        0.0
    } else if tolerance == 0.0 {
        f64::INFINITY
    } else {
        mean.abs() / tolerance
    };
    let point = [
        ("state0".to_string(), state.0[0]),
        ("state1".to_string(), state.0[1]),
    ]
    .into_iter()
    .collect();
    Ok(VerificationReport::new(
        "conditional_mean",
        margin,
        1.0,
        point,
        format!("{n_samples} samples, seed {seed}"),
    )
    .with_detail("mean", mean)
    .with_detail("std_dev", sd)
    .with_detail("tolerance", tolerance))
}

pub fn generate_paths(
    gen: &GeneratorSpec,
    horizon: u64,
    n_paths: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    Simulator::default().generate_paths(gen, horizon, n_paths, seed)
}

pub fn validate_bound(
    gen: &GeneratorSpec,
    horizon: u64,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    Simulator::default().validate_bound(gen, horizon, delta, n_paths, seed)
}

pub fn tightness(
    gen: &GeneratorSpec,
    horizon: u64,
    delta: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    Simulator::default().tightness(gen, horizon, delta, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DistributionSpec;
    use crate::generator::MagnitudeRule;

    fn gaussian_gen() -> GeneratorSpec {
        GeneratorSpec::iid(DistributionSpec::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let g = GeneratorSpec::scaled_gaussian(0.5, 1.0).unwrap();
        let a = generate_paths(&g, 30, 500, 11).unwrap();
        let b = generate_paths(&g, 30, 500, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_paths(&g, 30, 500, 12).unwrap();
        assert_ne!(a.path_means, c.path_means);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let g = gaussian_gen();
        let one = Simulator::default()
            .with_jobs(Some(1))
            .generate_paths(&g, 20, 300, 4)
            .unwrap();
        let three = Simulator::default()
            .with_jobs(Some(3))
            .generate_paths(&g, 20, 300, 4)
            .unwrap();
        let any = Simulator::default().generate_paths(&g, 20, 300, 4).unwrap();
        assert_eq!(one, three);
        assert_eq!(one, any);
    }

    #[test]
    fn constant_zero_paths_are_zero() {
        let s = generate_paths(&GeneratorSpec::constant_zero(), 17, 100, 0).unwrap();
        assert!(s.path_means.iter().all(|&m| m == 0.0));
        let r = validate_bound(&GeneratorSpec::constant_zero(), 5, 0.1, 100, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.details["upper_violations"], 0.0);
        assert_eq!(r.details["lower_violations"], 0.0);
        assert!(matches!(
            tightness(&GeneratorSpec::constant_zero(), 5, 0.1, 100, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn budget_guard() {
        let g = gaussian_gen();
        let err = Simulator::default()
            .with_budget(999)
            .generate_paths(&g, 10, 100, 0)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::Budget {
                requested: 1000,
                budget: 999
            }
        ));
        assert!(generate_paths(&g, 0, 10, 0).is_err());
        assert!(generate_paths(&g, 10, 0, 0).is_err());
    }

    #[test]
    fn violations_and_quantiles() {
        let s = SimulationSummary::new(1, 0, vec![0.3, -2.0, 1.0, 2.0, -1.0]);
        assert_eq!(s.violations(1.0), (1, 1));
        assert_eq!(s.violations(0.0), (3, 2));
        assert_eq!(s.quantile(0.2).unwrap(), -2.0);
        assert_eq!(s.quantile(0.21).unwrap(), -1.0);
        assert_eq!(s.quantile(1.0).unwrap(), 2.0);
        assert!(s.quantile(0.0).is_err());
        let stats = s.stats(&[0.5, 0.9]).unwrap();
        assert!(stats.quantiles["0.5"] <= stats.quantiles["0.9"]);
    }

    #[test]
    fn csv_dump() {
        let s = SimulationSummary::new(1, 0, vec![0.5, -0.25]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path_mean\n0.5\n-0.25\n");
    }

    #[test]
    fn conditional_mean_constant_zero_exact() {
        let g = GeneratorSpec::constant_zero();
        let r = conditional_mean_check(&g, &g.initial_state(), 100, 3).unwrap();
        assert!(r.pass);
        assert_eq!(r.details["mean"], 0.0);
    }

    #[test]
    fn conditional_mean_rejects_bad_state() {
        let g = GeneratorSpec::sign_flip(1.0, MagnitudeRule::Constant).unwrap();
        assert!(conditional_mean_check(&g, &MarkovState([4.0, 0.0]), 100, 3).is_err());
    }
}
