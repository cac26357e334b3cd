//! Result tables on disk: a deterministic CSV of per-cell results and a
//! JSON summary with aggregates and timings.
//!
//! The CSV holds only fields that are a pure function of the inputs and
//! seeds, so repeated runs produce byte-identical files; wall-clock
//! timings live in the JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::harness::{ExperimentOutcome, SweepAxis};

pub const RESULT_HEADER: &str =
    "method,dataset,seed,expected_test_loss,map_test_loss,selected_c,m_clip,clip_fraction,error\n";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the per-cell rows as CSV text.
pub fn results_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from(RESULT_HEADER);
    for r in &outcome.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method.name(),
            r.dataset,
            r.seed,
            r.expected_test_loss,
            r.map_test_loss,
            opt_f64(r.selected_c),
            r.m_clip,
            r.clip_fraction,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    out
}

/// Renders a sweep as CSV: one row per (axis value, method, seed).
pub fn sweep_csv(axis: SweepAxis, results: &[(f64, ExperimentOutcome)]) -> String {
    let mut out = format!(
        "{},method,dataset,seed,expected_test_loss,map_test_loss,selected_c,m_clip,clip_fraction,error\n",
        axis.name()
    );
    for (value, outcome) in results {
        for r in &outcome.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                value,
                r.method.name(),
                r.dataset,
                r.seed,
                r.expected_test_loss,
                r.map_test_loss,
                opt_f64(r.selected_c),
                r.m_clip,
                r.clip_fraction,
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
    }
    out
}

/// JSON summary of an experiment: method means, paired tests, timings.
pub fn summary_json(outcome: &ExperimentOutcome) -> Result<String> {
    let timings: Vec<serde_json::Value> = outcome
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "method": r.method.name(),
                "seed": r.seed,
                "train_seconds": r.train_seconds,
            })
        })
        .collect();
    let value = serde_json::json!({
        "method_means": outcome
            .method_means
            .iter()
            .map(|(m, v)| serde_json::json!({"method": m, "mean_expected_test_loss": v}))
            .collect::<Vec<_>>(),
        "poem_vs_ips_batch": outcome.poem_vs_ips_batch,
        "poem_vs_ips_stochastic": outcome.poem_vs_ips_stochastic,
        "timings": timings,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
