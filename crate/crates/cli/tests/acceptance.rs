//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or exceeds its runtime limit.

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subgauss_core::bounds::*;
use subgauss_core::sim::validate_summary;
use subgauss_core::verify::{self, LogGrid, VerificationReport};
use subgauss_core::{DistributionSpec, GeneratorSpec, MagnitudeRule, Simulator, SubgaussianParams};

const BIN: &str = env!("CARGO_BIN_EXE_subgauss");
const SEED: u64 = 20240917;

type Check = Result<String, String>;

/// Id, name, runtime limit in seconds, body.
type Criterion = (&'static str, &'static str, u64, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ac1() -> Check {
    let p = SubgaussianParams::new(1.0, 1.0).map_err(err)?;
    let eps = subgaussian_epsilon(&p, 28, (-1.0f64).exp()).map_err(err)?;
    ensure((eps - 1.0).abs() <= 1e-12, || {
        format!("epsilon(1, 1, 28, 1/e) = {eps}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = SubgaussianParams::new(
            rng.random_range(1.0..100.0),
            10f64.powf(rng.random_range(-3.0..3.0)),
        )
        .map_err(err)?;
        let t = rng.random_range(1..10_000_000u64);
        let d = 10f64.powf(rng.random_range(-15.0..-1e-3));
        let e = subgaussian_epsilon(&p, t, d).map_err(err)?;
        let back = subgaussian_delta(&p, t, e).map_err(err)?;
        let e2 = subgaussian_epsilon(&p, t, back).map_err(err)?;
        worst = worst.max(rel(back, d)).max(rel(e2, e));
    }
    ensure(worst <= 1e-12, || {
        format!("round-trip relative error {worst:e}")
    })?;
    Ok(format!(
        "epsilon(1,1,28,1/e) = {eps}; worst round-trip rel. error {worst:.2e} over 10^4 tuples"
    ))
}

fn ac2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let (mut worst_value, mut worst_grid) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = SubgaussianParams::new(
            rng.random_range(1.0..20.0),
            10f64.powf(rng.random_range(-2.0..2.0)),
        )
        .map_err(err)?;
        let eps = 10f64.powf(rng.random_range(-2.0..1.0));
        let t = rng.random_range(1..100_000u64);
        let s_star = p.c() * eps / (14.0 * p.b());
        let hi = 3.0 * s_star;
        let step = hi / (n - 1) as f64;
        let (mut best_s, mut best) = (0.0, f64::INFINITY);
        for i in 0..n {
            let s = i as f64 * step;
            let v = chernoff_exponent(s, eps, t, &p).map_err(err)?;
            if v < best {
                best = v;
                best_s = s;
            }
        }
        ensure((best_s - s_star).abs() <= step, || {
            format!("grid argmin {best_s} vs {s_star}, step {step}")
        })?;
        let closed = -p.c() * t as f64 * eps * eps / (28.0 * p.b());
        let at_star =
            chernoff_exponent(optimal_s(eps, &p).map_err(err)?, eps, t, &p).map_err(err)?;
        worst_value = worst_value.max(rel(at_star, closed));
        // the grid minimum can only sit above the true one by (offset / s*)^2
        worst_grid = worst_grid.max(rel(best, closed) / ((step / s_star).powi(2) + 1e-15));
    }
    ensure(worst_value <= 1e-10, || {
        format!("value at c eps/(14b) off by {worst_value:e}")
    })?;
    ensure(worst_grid <= 1.0, || {
        format!("grid minimum above parabola bound ({worst_grid})")
    })?;
    Ok(format!(
        "100 cases, argmin within one step; worst rel. error at optimum {worst_value:.2e}"
    ))
}

fn ac3() -> Check {
    let e = std::f64::consts::E;
    let cases = [
        (
            DistributionSpec::gaussian(1.0).map_err(err)?,
            1.0 / 28.0,
            "gaussian",
        ),
        (
            DistributionSpec::rademacher(1.0).map_err(err)?,
            1.0 / (14.0 * e),
            "rademacher",
        ),
        (
            DistributionSpec::uniform(1.0).map_err(err)?,
            1.0 / (42.0 * e),
            "uniform",
        ),
    ];
    let mut parts = Vec::new();
    for (d, expected, name) in cases {
        let p = *d.declared_params().ok_or("missing params")?;
        let grid = LogGrid::lemma_default(&p);
        ensure(grid.points == 400, || "grid size".into())?;
        let r = verify::verify_mgf_lemma(&d, &p, &grid).map_err(err)?;
        ensure(r.pass, || format!("{name} failed: {r:?}"))?;
        ensure((r.worst_margin - expected).abs() <= 1e-4, || {
            format!("{name} max ratio {}", r.worst_margin)
        })?;
        if name != "gaussian" {
            // the gaussian ratio is constant in s; the others peak as s -> 0
            ensure(r.worst_point["s"] == grid.lo, || {
                format!("{name} peak at s={}", r.worst_point["s"])
            })?;
        }
        parts.push(format!(
            "{name} {:.6} (expected {expected:.6})",
            r.worst_margin
        ));
    }
    Ok(parts.join(", "))
}

fn ac4() -> Check {
    let c = 1.0;
    let small = verify::small_s_grid(c, 50);
    let large = verify::large_s_grid(c, 50);
    let small_reports = small
        .iter()
        .map(|&s| verify::verify_series_small_s(c, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let large_reports = large
        .iter()
        .map(|&s| verify::verify_series_large_s(c, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    ensure(small.len() == 50 && large.len() == 50, || {
        "grid sizes".into()
    })?;
    ensure(small_reports.iter().all(|r| r.pass), || {
        "small-s series check failed".into()
    })?;
    ensure(large_reports.iter().all(|r| r.pass), || {
        "large-s series check failed".into()
    })?;
    let scalar = verify::verify_scalar_grid(&verify::scalar_a_grid(), &verify::SCALAR_B_GRID)
        .map_err(err)?;
    ensure(scalar.pass, || {
        format!("scalar inequality failed: {scalar:?}")
    })?;
    // c/s^2 invariance: scaling c by 4^k and s by 2^k keeps every figure bit-identical
    let check = |c: f64, s: f64| -> Result<VerificationReport, String> {
        if c / (s * s) >= 4.0 {
            verify::verify_series_small_s(c, s).map_err(err)
        } else {
            verify::verify_series_large_s(c, s).map_err(err)
        }
    };
    let mut compared = 0;
    for &s in small.iter().chain(&large) {
        let base = check(c, s)?;
        for k in [-3i32, -1, 2, 5] {
            let f = 2f64.powi(k);
            let scaled = check(c * f * f, s * f)?;
            ensure(
                scaled.details == base.details && scaled.worst_margin == base.worst_margin,
                || format!("invariance broken at s={s}, k={k}"),
            )?;
            compared += 1;
        }
    }
    Ok(format!(
        "50 + 50 series points and {} scalar points pass; {compared} rescaled pairs bit-identical",
        verify::scalar_a_grid().len() * verify::SCALAR_B_GRID.len()
    ))
}

fn ac5() -> Check {
    let d = DistributionSpec::laplace(1.0).map_err(err)?;
    let p = SubgaussianParams::new(1.0, 1.0).map_err(err)?;
    let r = verify::tail_envelope_check(
        &d,
        &p,
        verify::precondition_a_max(&d, &p),
        verify::DEFAULT_A_POINTS,
    )
    .map_err(err)?;
    ensure(!r.pass, || "laplace passed the envelope check".into())?;
    let first = r.details["first_failure_a"];
    ensure((first - 1.4712).abs() <= 0.05, || {
        format!("first failure at a={first}")
    })?;
    Ok(format!(
        "laplace fails (b=1, c=1); first failing a = {first}"
    ))
}

fn stochastic_generators() -> Result<Vec<GeneratorSpec>, String> {
    Ok(vec![
        GeneratorSpec::iid(DistributionSpec::gaussian(1.0).map_err(err)?).map_err(err)?,
        GeneratorSpec::scaled_gaussian(0.5, 1.0).map_err(err)?,
        GeneratorSpec::sign_flip(1.0, MagnitudeRule::Constant).map_err(err)?,
    ])
}

fn ac6() -> Check {
    let sim = Simulator::default().with_jobs(Some(1));
    let n = 20_000;
    let mut cells = 0;
    let mut violations = 0.0;
    for gen in stochastic_generators()? {
        for t in [50, 200] {
            let summary = sim.generate_paths(&gen, t, n, SEED).map_err(err)?;
            for delta in [0.1, 0.01] {
                let r = validate_summary(&gen, &summary, delta).map_err(err)?;
                ensure(r.pass, || {
                    format!("{} T={t} delta={delta}: {r:?}", gen.label())
                })?;
                violations += r.details["upper_violations"] + r.details["lower_violations"];
                cells += 1;
            }
        }
    }
    Ok(format!(
        "{cells} cells pass single-threaded at n = {n}; observed violations: {violations}"
    ))
}

fn ac7() -> Check {
    let gen = GeneratorSpec::iid(DistributionSpec::gaussian(1.0).map_err(err)?).map_err(err)?;
    let ratio = Simulator::default()
        .tightness(&gen, 100, 0.05, 100_000, SEED)
        .map_err(err)?;
    ensure((ratio - 7.87).abs() <= 0.3, || {
        format!("gaussian tightness ratio {ratio}")
    })?;
    let target = (14.0 * std::f64::consts::E).sqrt();
    let mut worst = 0.0f64;
    for bound in [0.25, 1.0, 3.0] {
        let p = params_from_bound(bound).map_err(err)?;
        for t in [1, 50, 200, 10_000] {
            for delta in [0.3, 0.05, 1e-6] {
                let r = subgaussian_epsilon(&p, t, delta).map_err(err)?
                    / classic_azuma_epsilon(bound, t, delta).map_err(err)?;
                worst = worst.max((r - target).abs());
            }
        }
    }
    ensure(worst <= 1e-6, || {
        format!("subgaussian/classic ratio off by {worst:e}")
    })?;
    Ok(format!("gaussian tightness {ratio:.4}; subgaussian/classic = sqrt(14e) = {target:.6} (max dev {worst:.1e})"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let o = Command::new(BIN)
        .args(args)
        .env_remove("SUBGAUSS_OUT_DIR")
        .output()
        .map_err(err)?;
    if !o.status.success() {
        return Err(format!(
            "`subgauss {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    String::from_utf8(o.stdout).map_err(err)
}

fn ac8() -> Check {
    let dirs = (0..3)
        .map(|_| tempfile::tempdir().map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    for (dir, jobs) in dirs.iter().zip(["1", "4", "1"]) {
        run_cli(&[
            "campaign",
            "--jobs",
            jobs,
            "--out",
            dir.path().to_str().ok_or("path")?,
        ])?;
    }
    for name in ["simulation.csv", "report.json"] {
        let first = std::fs::read(dirs[0].path().join(name)).map_err(err)?;
        for d in &dirs[1..] {
            ensure(
                std::fs::read(d.path().join(name)).map_err(err)? == first,
                || format!("{name} differs"),
            )?;
        }
    }
    Ok("default campaign CSV and JSON byte-identical over --jobs 1, 4, 1".into())
}

fn ac9() -> Check {
    let out = run_cli(&["tighten", "--format", "json"])?;
    let rows: serde_json::Value = serde_json::from_str(&out).map_err(err)?;
    let e = std::f64::consts::E;
    let expected = [
        ("gaussian", 0.25),
        ("rademacher", 1.0 / (2.0 * e)),
        ("uniform", 1.0 / (6.0 * e)),
    ];
    let rows = rows.as_array().ok_or("not an array")?;
    ensure(rows.len() == 3, || format!("{} rows", rows.len()))?;
    let mut parts = Vec::new();
    for (row, (name, k)) in rows.iter().zip(expected) {
        let label = row["label"].as_str().unwrap_or_default();
        let got = row["constant"].as_f64().ok_or("missing constant")?;
        ensure(label.starts_with(name), || {
            format!("unexpected row {label}")
        })?;
        ensure((got - k).abs() <= 1e-4, || {
            format!("{name}: K = {got}, expected {k}")
        })?;
        parts.push(format!("{name} K={got:.6}"));
    }
    Ok(format!("{} (all far below 7)", parts.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "formula fidelity", 1, ac1),
        ("AC2", "Chernoff optimality", 10, ac2),
        ("AC3", "lemma certification", 5, ac3),
        ("AC4", "proof-step certification", 5, ac4),
        ("AC5", "negative control", 1, ac5),
        ("AC6", "deviation-bound dominance", 60, ac6),
        ("AC7", "conservativeness", 60, ac7),
        ("AC8", "determinism", 120, ac8),
        ("AC9", "constant tightening", 5, ac9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(limit) => {
                Err(format!("runtime over the {limit} s limit"))
            }
            r => r,
        };
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(msg) => println!("{id} PASS {name}: {msg} [{secs:.2} s < {limit} s]"),
            Err(msg) => {
                failed += 1;
                println!("{id} FAIL {name}: {msg} [{secs:.2} s, limit {limit} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
