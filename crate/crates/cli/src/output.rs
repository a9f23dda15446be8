//! File output and human-readable tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::report::{BoundRow, Simulation, TightenRow, Verification};

/// Write `bytes` to `dir/name` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path)
        .with_context(|| format!("cannot rename into {}", path.display()))?;
    Ok(path)
}

/// File-name-safe form of a generator label.
pub fn slug(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '-' => out.push(ch),
            _ if !out.ends_with('_') => out.push('_'),
            _ => {}
        }
    }
    out.trim_matches('_').to_string()
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_fixed(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_else(|| "-".into())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Left-aligned columns separated by two spaces.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let joined: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", joined.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn bound_rows_table(rows: &[BoundRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.generator.clone(),
                r.horizon.to_string(),
                fixed(r.delta),
                fixed(r.b),
                fixed(r.c),
                fixed(r.epsilon_theorem),
                opt_fixed(r.epsilon_classic),
            ]
        })
        .collect();
    table(
        &[
            "generator",
            "T",
            "delta",
            "b",
            "c",
            "epsilon",
            "epsilon_classic",
        ],
        &body,
    )
}

pub fn verification_table(v: &Verification) -> String {
    let mut body = Vec::new();
    for d in &v.distributions {
        for r in &d.checks {
            body.push(vec![
                d.label.clone(),
                fixed(d.params.b()),
                fixed(d.params.c()),
                r.check.clone(),
                yes_no(r.pass).into(),
                fixed(r.worst_margin),
                fixed(r.limit),
            ]);
        }
    }
    let mut out = table(
        &["distribution", "b", "c", "check", "pass", "margin", "limit"],
        &body,
    );
    out.push('\n');
    let summary: Vec<Vec<String>> = v
        .distributions
        .iter()
        .map(|d| {
            vec![
                d.label.clone(),
                format!("{:?}", d.expect).to_lowercase(),
                if d.holds { "pass" } else { "fail" }.into(),
                yes_no(d.as_expected).into(),
            ]
        })
        .collect();
    out.push_str(&table(
        &["distribution", "expected", "observed", "as_expected"],
        &summary,
    ));
    out.push('\n');
    let steps: Vec<Vec<String>> = v
        .proof_steps
        .iter()
        .map(|r| {
            vec![
                r.check.clone(),
                yes_no(r.pass).into(),
                fixed(r.worst_margin),
                fixed(r.limit),
            ]
        })
        .collect();
    out.push_str(&table(&["proof step", "pass", "margin", "limit"], &steps));
    out
}

pub fn tighten_table(rows: &[TightenRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fixed(r.b),
                fixed(r.c),
                fixed(r.constant),
                fixed(r.implied_deviation_constant),
            ]
        })
        .collect();
    table(&["distribution", "b", "c", "K", "4K"], &body)
}

pub fn simulation_table(s: &Simulation) -> String {
    let body: Vec<Vec<String>> = s
        .cells
        .iter()
        .map(|c| {
            vec![
                c.generator.clone(),
                c.horizon.to_string(),
                fixed(c.delta),
                fixed(c.epsilon_theorem),
                c.upper_violations.to_string(),
                c.lower_violations.to_string(),
                fixed(c.empirical_quantile),
                opt_fixed(c.tightness_ratio),
                yes_no(c.pass).into(),
            ]
        })
        .collect();
    table(
        &[
            "generator",
            "T",
            "delta",
            "epsilon",
            "upper",
            "lower",
            "quantile",
            "ratio",
            "pass",
        ],
        &body,
    )
}
