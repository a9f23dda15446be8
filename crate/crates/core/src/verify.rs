//! Numerical certification of the MGF argument.
//!
//! Every check returns a [`VerificationReport`] whose `worst_margin` is
//! compared against `limit` (pass iff `worst_margin <= limit`). Ratio checks
//! use limit 1; log-space checks report `ln(lhs) - ln(rhs)` with limit 0.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};

use serde::Serialize;

use crate::bounds::{mgf_envelope, second_moment_envelope, MGF_CONSTANT};
use crate::distribution::DistributionSpec;
use crate::error::{check_positive, Error, Result};
use crate::params::SubgaussianParams;

/// Points in the default a-grid of the envelope check.
pub const DEFAULT_A_POINTS: usize = 400;
/// Points in the default s-grid of the MGF checks.
pub const DEFAULT_S_POINTS: usize = 400;
/// The s-grid must reach down to this multiple of `sqrt(c)`...
pub const S_GRID_MIN_FACTOR: f64 = 1e-3;
/// ...and up to this one, so both sides of the `sqrt(c)/2` breakpoint are covered.
pub const S_GRID_MAX_FACTOR: f64 = 10.0;
/// Series summation stops once a (decreasing) term is below this fraction of the running sum.
pub const SERIES_REL_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub limit: f64,
    pub worst_point: BTreeMap<String, f64>,
    pub grid: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(
        check: impl Into<String>,
        worst_margin: f64,
        limit: f64,
        worst_point: BTreeMap<String, f64>,
        grid: impl Into<String>,
    ) -> Self {
        Self {
            check: check.into(),
            // NaN never passes.
            pass: worst_margin <= limit,
            worst_margin,
            limit,
            worst_point,
            grid: grid.into(),
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Fold reports of the same check over a grid into one, keeping the worst.
    /// Reports must share a limit.
    pub fn combine(
        check: impl Into<String>,
        grid: impl Into<String>,
        reports: impl IntoIterator<Item = VerificationReport>,
    ) -> Result<Self> {
        let mut worst: Option<VerificationReport> = None;
        let mut all_pass = true;
        for r in reports {
            all_pass &= r.pass;
            worst = match worst {
                None => Some(r),
                Some(w) => {
                    if w.limit != r.limit {
                        return Err(Error::Precondition(
                            "cannot combine reports with different limits".into(),
                        ));
                    }
                    if r.worst_margin > w.worst_margin
                        || (r.worst_margin.is_nan() && !w.worst_margin.is_nan())
                    {
                        Some(r)
                    } else {
                        Some(w)
                    }
                }
            };
        }
        let w = worst.ok_or(Error::EmptyGrid("no reports to combine"))?;
        let mut out = VerificationReport::new(check, w.worst_margin, w.limit, w.worst_point, grid);
        out.details = w.details;
        out.pass &= all_pass;
        Ok(out)
    }
}

fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Geometric grid from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        check_positive("grid lo", lo)?;
        check_positive("grid hi", hi)?;
        if hi < lo {
            return Err(Error::domain("grid hi", hi, "hi >= lo"));
        }
        if points < 2 {
            return Err(Error::EmptyGrid("a log grid needs at least 2 points"));
        }
        Ok(Self { lo, hi, points })
    }

    /// `[1e-3 sqrt(c), 10 sqrt(c)]` with the default point count.
    pub fn lemma_default(params: &SubgaussianParams) -> Self {
        Self::spanning(params, DEFAULT_S_POINTS)
    }

    pub fn spanning(params: &SubgaussianParams, points: usize) -> Self {
        let root = params.c().sqrt();
        Self {
            lo: S_GRID_MIN_FACTOR * root,
            hi: S_GRID_MAX_FACTOR * root,
            points: points.max(2),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let ratio = (self.hi / self.lo).ln();
        (0..n)
            .map(|i| match i {
                0 => self.lo,
                _ if i == n - 1 => self.hi,
                _ => self.lo * (ratio * i as f64 / (n - 1) as f64).exp(),
            })
            .collect()
    }

    fn covers_lemma_range(&self, params: &SubgaussianParams) -> bool {
        let root = params.c().sqrt();
        let tol = 1e-12;
        self.lo <= S_GRID_MIN_FACTOR * root * (1.0 + tol)
            && self.hi >= S_GRID_MAX_FACTOR * root * (1.0 - tol)
    }

    fn describe(&self) -> String {
        format!("log s-grid [{}, {}] x {}", self.lo, self.hi, self.points)
    }
}

/// Check `max(Pr(X >= a), Pr(X <= -a)) <= b exp(-c a^2)` at
/// `a = a_max k / n`, `k = 1..=n`. The margin is the largest tail/envelope ratio.
pub fn tail_envelope_check(
    dist: &DistributionSpec,
    params: &SubgaussianParams,
    a_max: f64,
    n_grid: usize,
) -> Result<VerificationReport> {
    check_positive("a_max", a_max)?;
    if n_grid < 2 {
        return Err(Error::domain("n_grid", n_grid as f64, "n_grid >= 2"));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_a = f64::NAN;
    let mut first_failure = None;
    for k in 1..=n_grid {
        let a = a_max * k as f64 / n_grid as f64;
        let ln_env = params.log_envelope(a);
        let ln_tail = dist.ln_upper_tail(a).max(dist.ln_lower_tail(a));
        let ratio = (ln_tail - ln_env).exp();
        if ratio > worst {
            worst = ratio;
            worst_a = a;
        }
        if ratio > 1.0 && first_failure.is_none() {
            first_failure = Some(a);
        }
    }
    let mut report = VerificationReport::new(
        "tail_envelope",
        worst,
        1.0,
        point(&[("a", worst_a)]),
        format!("linear a-grid (0, {a_max}] x {n_grid}"),
    );
    if let Some(a) = first_failure {
        report = report.with_detail("first_failure_a", a);
    }
    Ok(report)
}

/// Width of the envelope grid used as the precondition of the MGF checks:
/// `2 (1 + scale) max(1, 1/sqrt(c))`.
pub fn precondition_a_max(dist: &DistributionSpec, params: &SubgaussianParams) -> f64 {
    2.0 * (1.0 + dist.scale()) * (1.0f64).max(1.0 / params.c().sqrt())
}

/// Envelope check on the precondition grid; `Err` if it does not hold or
/// the family is not subgaussian at all.
pub fn require_envelope(
    dist: &DistributionSpec,
    params: &SubgaussianParams,
) -> Result<VerificationReport> {
    let a_max = precondition_a_max(dist, params);
    let report = tail_envelope_check(dist, params, a_max, DEFAULT_A_POINTS)?;
    if !report.pass {
        let at = report
            .details
            .get("first_failure_a")
            .copied()
            .unwrap_or(f64::NAN);
        return Err(Error::Precondition(format!(
            "{} tails exceed the envelope (b={}, c={}) first at a={at}",
            dist.family().name(),
            params.b(),
            params.c()
        )));
    }
    if !dist.is_subgaussian() {
        return Err(Error::Precondition(format!(
            "{} tails are not subgaussian; envelope only held on (0, {a_max}]",
            dist.family().name()
        )));
    }
    Ok(report)
}

fn require_lemma_grid(grid: &LogGrid, params: &SubgaussianParams) -> Result<()> {
    if grid.covers_lemma_range(params) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "s-grid [{}, {}] must span [{}, {}]",
            grid.lo,
            grid.hi,
            S_GRID_MIN_FACTOR * params.c().sqrt(),
            S_GRID_MAX_FACTOR * params.c().sqrt()
        )))
    }
}

/// Check `ln E[e^{sX}] <= 7 b s^2 / c` on the grid; the margin is the
/// largest ratio of the two sides.
pub fn verify_mgf_lemma(
    dist: &DistributionSpec,
    params: &SubgaussianParams,
    grid: &LogGrid,
) -> Result<VerificationReport> {
    require_envelope(dist, params)?;
    require_lemma_grid(grid, params)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_s = f64::NAN;
    for s in grid.values() {
        let ratio = dist.log_mgf(s)? / mgf_envelope(s, params, false)?;
        if ratio > worst {
            worst = ratio;
            worst_s = s;
        }
    }
    Ok(VerificationReport::new(
        "mgf_lemma",
        worst,
        1.0,
        point(&[("s", worst_s)]),
        grid.describe(),
    ))
}

/// `E[X^2] <= 2b/c`; the margin is the ratio of the two sides.
pub fn second_moment_check(
    dist: &DistributionSpec,
    params: &SubgaussianParams,
) -> Result<VerificationReport> {
    require_envelope(dist, params)?;
    let m2 = dist.second_moment();
    let bound = second_moment_envelope(params);
    Ok(
        VerificationReport::new("second_moment", m2 / bound, 1.0, BTreeMap::new(), "exact")
            .with_detail("second_moment", m2)
            .with_detail("envelope", bound),
    )
}

/// Smallest `K` with `ln E[e^{sX}] <= K b s^2 / c` on the grid.
pub fn tighten_constant(
    dist: &DistributionSpec,
    params: &SubgaussianParams,
    grid: &LogGrid,
) -> Result<f64> {
    require_envelope(dist, params)?;
    require_lemma_grid(grid, params)?;
    let mut k = f64::NEG_INFINITY;
    for s in grid.values() {
        k = k.max(dist.log_mgf(s)? * params.c() / (params.b() * s * s));
    }
    Ok(k)
}

/// Running `ln(sum exp(x_i))` without overflow.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    let mut s = LogSum::new();
    s.add(a);
    s.add(b);
    s.ln()
}

/// Log-space partial sums of `sum_{j>=1} exp(j (2 - r j))`, split at `j = split`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSums {
    pub ln_initial: f64,
    pub ln_tail: f64,
    pub terms: u64,
}

impl SeriesSums {
    pub fn ln_full(&self) -> f64 {
        ln_add(self.ln_initial, self.ln_tail)
    }
}

/// Sum the series with `r = c / s^2`; terms `j <= split` go to the initial part.
///
/// The series terms depend on `(c, s)` only through `r`.
pub fn series_sums(r: f64, split: u64) -> SeriesSums {
    let peak = 1.0 / r;
    let mut initial = LogSum::new();
    let mut tail = LogSum::new();
    let mut j: u64 = 1;
    loop {
        let jf = j as f64;
        let exponent = jf * (2.0 - r * jf);
        let part = if j <= split { &mut initial } else { &mut tail };
        let running = part.ln();
        part.add(exponent);
        if jf > peak && j > split && exponent < running + SERIES_REL_CUTOFF.ln() {
            break;
        }
        j += 1;
    }
    SeriesSums {
        ln_initial: initial.ln(),
        ln_tail: tail.ln(),
        terms: j,
    }
}

fn series_ratio(c: f64, s: f64) -> Result<f64> {
    check_positive("c", c)?;
    check_positive("s", s)?;
    Ok(c / (s * s))
}

/// Small-s regime (`s <= sqrt(c)/2`): `S <= 2 exp(-c/(2 s^2))` and `S <= 4 s^2 / c`.
///
/// Margin is the larger of `ln S - ln(bound)` over the two bounds.
pub fn verify_series_small_s(c: f64, s: f64) -> Result<VerificationReport> {
    let r = series_ratio(c, s)?;
    if r < 4.0 {
        return Err(Error::Precondition(format!(
            "s = {s} exceeds sqrt(c)/2 = {}",
            0.5 * c.sqrt()
        )));
    }
    let sums = series_sums(r, 0);
    let ln_s = sums.ln_full();
    let ln_geometric = LN_2 - 0.5 * r;
    let ln_quadratic = (4.0 / r).ln();
    let margin = (ln_s - ln_geometric).max(ln_s - ln_quadratic);
    Ok(VerificationReport::new(
        "series_small_s",
        margin,
        0.0,
        point(&[("c", c), ("s", s)]),
        "single point",
    )
    .with_detail("sum", ln_s.exp())
    .with_detail("ln_sum", ln_s)
    .with_detail("bound_geometric", ln_geometric.exp())
    .with_detail("bound_quadratic", 4.0 / r)
    .with_detail("terms", sums.terms as f64))
}

/// Large-s regime (`s > sqrt(c)/2`), with `u = s^2 / c`:
///
/// * tail `sum_{j > 3u} <= 2`,
/// * initial `sum_{j <= floor(3u)} <= 3u e^u` (each term is at most `e^u`),
/// * full sum `<= 8u + e^{(1 + 1/e) u}`.
///
/// The intermediate step `3u e^u <= e^{(1 + 1/e) u}` is false for `u` in
/// roughly `(0.39, 8.94)`; it is reported under `link_slack` (positive
/// means it fails) but does not affect `pass`. The full-sum bound, which is
/// what the MGF estimate consumes, holds throughout.
pub fn verify_series_large_s(c: f64, s: f64) -> Result<VerificationReport> {
    let r = series_ratio(c, s)?;
    if r >= 4.0 {
        return Err(Error::Precondition(format!(
            "s = {s} does not exceed sqrt(c)/2 = {}",
            0.5 * c.sqrt()
        )));
    }
    let u = 1.0 / r;
    let split = (3.0 * u).floor() as u64;
    let sums = series_sums(r, split);
    let exp_growth = (1.0 + 1.0 / E) * u;

    let tail_slack = sums.ln_tail - 2f64.ln();
    let ln_count_bound = (3.0 * u).ln() + u;
    let initial_slack = sums.ln_initial - ln_count_bound;
    let ln_full_bound = ln_add((8.0 * u).ln(), exp_growth);
    let full_slack = sums.ln_full() - ln_full_bound;
    let margin = tail_slack.max(initial_slack).max(full_slack);

    Ok(VerificationReport::new(
        "series_large_s",
        margin,
        0.0,
        point(&[("c", c), ("s", s)]),
        "single point",
    )
    .with_detail("ln_initial", sums.ln_initial)
    .with_detail("ln_tail", sums.ln_tail)
    .with_detail("ln_full", sums.ln_full())
    .with_detail("tail_slack", tail_slack)
    .with_detail("initial_slack", initial_slack)
    .with_detail("full_slack", full_slack)
    .with_detail("link_slack", ln_count_bound - exp_growth)
    .with_detail("initial_vs_exp_slack", sums.ln_initial - exp_growth)
    .with_detail("terms", sums.terms as f64))
}

/// Closing scalar inequality for `a >= 1/4`, `b >= 1`, in two forms:
///
/// * literal: `1 + 10ba + e^{(1+1/e) b a} <= e^{7ba}`
/// * as derived: `1 + 10ba + b e^{(1+1/e) a} <= e^{7ba}`
///
/// They coincide at `b = 1`. Margin is the larger `ln(lhs) - 7ba`.
pub fn verify_scalar_inequality(a: f64, b: f64) -> Result<VerificationReport> {
    if !(a >= 0.25 && a.is_finite()) {
        return Err(Error::Precondition(format!("a = {a} must be >= 1/4")));
    }
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::Precondition(format!("b = {b} must be >= 1")));
    }
    let growth = 1.0 + 1.0 / E;
    let ln_lhs = |last: f64| {
        let mut sum = LogSum::new();
        sum.add(0.0);
        sum.add((10.0 * b * a).ln());
        sum.add(last);
        sum.ln()
    };
    let ln_literal = ln_lhs(growth * b * a);
    let ln_derived = ln_lhs(b.ln() + growth * a);
    let ln_rhs = MGF_CONSTANT * b * a;
    let margin = (ln_literal - ln_rhs).max(ln_derived - ln_rhs);
    Ok(VerificationReport::new(
        "scalar_inequality",
        margin,
        0.0,
        point(&[("a", a), ("b", b)]),
        "single point",
    )
    .with_detail("ln_lhs_literal", ln_literal)
    .with_detail("ln_lhs_derived", ln_derived)
    .with_detail("ln_rhs", ln_rhs))
}

/// `a in {0.25 + 0.05 k : k = 0..=100}`.
pub fn scalar_a_grid() -> Vec<f64> {
    (0..=100).map(|k| 0.25 + 0.05 * k as f64).collect()
}

pub const SCALAR_B_GRID: [f64; 5] = [1.0, 1.5, 2.0, 5.0, 10.0];

/// Scalar inequality over the product grid.
pub fn verify_scalar_grid(a_values: &[f64], b_values: &[f64]) -> Result<VerificationReport> {
    let reports = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .map(|(a, b)| verify_scalar_inequality(a, b))
        .collect::<Result<Vec<_>>>()?;
    VerificationReport::combine(
        "scalar_inequality",
        format!("a x b grid {} x {}", a_values.len(), b_values.len()),
        reports,
    )
}

/// `n` evenly spaced `s` in `(0, sqrt(c)/2]`.
pub fn small_s_grid(c: f64, n: usize) -> Vec<f64> {
    let top = 0.5 * c.sqrt();
    (1..=n).map(|k| top * k as f64 / n as f64).collect()
}

/// `n` evenly spaced `s` in `(sqrt(c)/2, 20 sqrt(c)]`.
pub fn large_s_grid(c: f64, n: usize) -> Vec<f64> {
    let lo = 0.5 * c.sqrt();
    let hi = 20.0 * c.sqrt();
    (1..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

/// Both series checks over their grids for one `c`.
pub fn verify_series_grids(c: f64, n: usize) -> Result<(VerificationReport, VerificationReport)> {
    let small = small_s_grid(c, n)
        .into_iter()
        .map(|s| verify_series_small_s(c, s))
        .collect::<Result<Vec<_>>>()?;
    let large = large_s_grid(c, n)
        .into_iter()
        .map(|s| verify_series_large_s(c, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        VerificationReport::combine(
            "series_small_s",
            format!("s in (0, sqrt(c)/2] x {n}, c={c}"),
            small,
        )?,
        VerificationReport::combine(
            "series_large_s",
            format!("s in (sqrt(c)/2, 20 sqrt(c)] x {n}, c={c}"),
            large,
        )?,
    ))
}
