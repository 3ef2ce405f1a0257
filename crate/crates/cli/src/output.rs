//! CSV files, the run manifest and the console summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use floquet_core::{write_trials_csv, ScalingFit};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::engine::{Outcome, Record, TheoryOutput};

pub fn write_records(path: &Path, records: &[Record]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if records.is_empty() {
        // the header alone still documents the schema
        w.write_record(RECORD_COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Column order of [`Record`].
pub const RECORD_COLUMNS: [&str; 35] = [
    "experiment",
    "instance_id",
    "lattice",
    "n",
    "model",
    "num_terms",
    "M_true",
    "tail_len",
    "eps0",
    "M_fit",
    "N",
    "substeps",
    "m",
    "observables",
    "sigma",
    "noise_target",
    "seed",
    "alpha",
    "eps_alpha",
    "frob_mean",
    "frob_std",
    "frob_full_mean",
    "frob_full_std",
    "sigma_min",
    "sigma_max",
    "condition",
    "residual",
    "rank_deficient",
    "symmetry_defect",
    "closure",
    "discrepancy",
    "m_stop",
    "converged",
    "wall_time",
    "status",
];

#[derive(Serialize)]
struct ScalingRow<'a> {
    axis: &'a str,
    value: f64,
    median_error: f64,
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn axis_name(fit: &ScalingFit) -> &'static str {
    match fit.axis {
        floquet_core::ScalingAxis::Rows => "S",
        floquet_core::ScalingAxis::Dimension => "K",
        floquet_core::ScalingAxis::Noise => "sigma",
    }
}

pub fn write_scaling(path: &Path, fits: &[ScalingFit]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for fit in fits {
        for &(value, median_error) in &fit.points {
            w.serialize(ScalingRow {
                axis: axis_name(fit),
                value,
                median_error,
                slope: fit.fit.slope,
                intercept: fit.fit.intercept,
                r2: fit.fit.r2,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_theory(dir: &Path, stem: &str, theory: &TheoryOutput) -> anyhow::Result<Vec<PathBuf>> {
    let trials = dir.join(format!("{stem}_trials.csv"));
    let file = fs::File::create(&trials).with_context(|| format!("creating {}", trials.display()))?;
    write_trials_csv(std::io::BufWriter::new(file), &theory.trials)?;
    let scaling = dir.join(format!("{stem}_scaling.csv"));
    write_scaling(&scaling, &theory.scaling)?;
    Ok(vec![trials, scaling])
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    jobs: usize,
    files: Vec<String>,
    rows: usize,
    failed_rows: usize,
    elapsed_seconds: f64,
    unix_time: u64,
    caps: Caps,
    #[serde(skip_serializing_if = "Option::is_none")]
    theory: Option<&'a TheoryOutput>,
}

#[derive(Serialize)]
struct Caps {
    max_qubits: usize,
    error_grid: usize,
}

/// Writes the CSV files and `manifest.json` into `dir`; returns their paths.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    jobs: usize,
    elapsed_seconds: f64,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = cfg.stem();
    let mut files = Vec::new();
    match &outcome.theory {
        Some(t) => files.extend(write_theory(dir, &stem, t)?),
        None => {
            let path = dir.join(format!("{stem}.csv"));
            write_records(&path, &outcome.records)?;
            files.push(path);
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        jobs,
        files: files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        rows: outcome.records.len(),
        failed_rows: outcome.records.iter().filter(|r| !r.ok()).count(),
        elapsed_seconds,
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        caps: Caps {
            max_qubits: floquet_core::MAX_QUBITS,
            error_grid: floquet_core::ERROR_GRID,
        },
        theory: outcome.theory.as_ref(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}

/// Grouping key of the summary: every axis except the seed.
fn cell_key(r: &Record) -> String {
    let opt = |v: Option<i64>| v.map_or("-".to_string(), |x| x.to_string());
    format!(
        "{:<16} {:<10} {:>3} {:>4} {:>7} {:>5} {:>6} {:>4} {:>4} {:>8}",
        r.lattice,
        r.model,
        r.m_true,
        r.tail_len,
        r.eps0,
        opt(r.m_fit.map(|v| v as i64)),
        r.samples,
        r.substeps,
        opt(r.m),
        r.sigma
    )
}

/// Mean ± std of `frob_mean` over seeds for every cell.
pub fn summary_table(records: &[Record]) -> String {
    let mut groups: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for r in records {
        let key = cell_key(r);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), 0)
        });
        match r.frob_mean {
            Some(e) if r.ok() => entry.0.push(e),
            _ => entry.1 += 1,
        }
    }
    let mut out = format!(
        "{:<16} {:<10} {:>3} {:>4} {:>7} {:>5} {:>6} {:>4} {:>4} {:>8}  {:>11} {:>10} {:>5} {:>6}\n",
        "lattice", "model", "M", "tail", "eps0", "M_fit", "N", "sub", "m", "sigma", "frob_mean", "std", "ok", "failed"
    );
    for key in order {
        let (errs, failed) = &groups[&key];
        let (mean, std) = if errs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errs.len() as f64;
            (mean, var.sqrt())
        };
        out.push_str(&format!(
            "{key}  {mean:>11.4e} {std:>10.3e} {:>5} {failed:>6}\n",
            errs.len()
        ));
    }
    out
}

pub fn theory_table(theory: &TheoryOutput) -> String {
    let s = &theory.summary;
    let mut out = String::new();
    if let Some(c) = &theory.calibration {
        out.push_str(&format!(
            "calibration: S = {} rows (failure {:.3}), fitted constant {:.4}\n",
            c.rows, c.failure_rate, c.fitted_c
        ));
    }
    out.push_str(&format!(
        "verification at S = {}: sigma_min violations {:.3}, error violations {:.3}, covariance violations {:.3}, budget 2δ = {:.3}\n",
        theory.verify_rows,
        s.sigma_min_violation_rate,
        s.error_violation_rate,
        s.covariance_violation_rate,
        2.0 * s.delta
    ));
    if let Some(c) = s.fitted_c {
        out.push_str(&format!("fitted error constant C = {c:.4}\n"));
    }
    for fit in &theory.scaling {
        out.push_str(&format!(
            "error vs {}: slope {:.4}, r2 {:.4}\n",
            axis_name(fit),
            fit.fit.slope,
            fit.fit.r2
        ));
    }
    out
}
