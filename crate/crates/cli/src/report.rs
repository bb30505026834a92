//! Report bundle emission: CSV curve tables, campaign summaries, histograms,
//! and the JSON summary, all with deterministic byte-for-byte formatting.
//!
//! Every float is printed with a fixed `{:.12e}` format and files are
//! written in a single call, so two runs with identical inputs produce
//! identical bytes. `curves.csv` is re-read and checked after writing: the
//! outcome probabilities at each phase must sum to one within
//! [`CURVE_SUM_TOL`], guarding the emission path itself against formatting
//! or truncation bugs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qmetro::campaign::Histogram;

/// Tolerated deviation of per-phase probability sums in a written curve file.
pub const CURVE_SUM_TOL: f64 = 1e-9;

/// Bundle format version recorded in `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// One row of `curves.csv`: outcome probability and its phase derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub theta: f64,
    pub mu: i32,
    pub p: f64,
    pub dp: f64,
}

/// One row of `fisher.csv`; `divergent` marks phases where a vanishing
/// probability keeps a finite-slope outcome, where the information blows up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherRow {
    pub theta: f64,
    pub f: f64,
    pub divergent: bool,
}

/// One row of `campaign.csv`: both protocols at a single `(theta0, m)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignRow {
    pub theta0: f64,
    pub m: usize,
    pub reps: usize,
    pub ml_std: f64,
    pub ml_bias: f64,
    pub ml_dres: f64,
    pub bayes_mean_c: f64,
    pub bayes_c_std: f64,
    pub bayes_dres: f64,
}

/// A campaign cell that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub theta0: f64,
    pub m: usize,
    pub protocol: String,
    pub error: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    /// Quantum Fisher information at the configured generator axes.
    pub qfi: f64,
    /// Quantum Fisher information at the optimized axes.
    pub qfi_opt: f64,
    /// The optimized axes as `[x, y, z]` components per qubit.
    pub opt_axes: Vec<[f64; 3]>,
    /// Certified entanglement depth implied by `qfi_opt`.
    pub depth: usize,
    /// Producibility bound for each group size `k`.
    pub bounds: BTreeMap<usize, f64>,
    /// Fidelity witness value; present only for four-qubit probes.
    pub witness: Option<f64>,
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes `curves.csv` and immediately re-validates the emitted file.
pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut text = String::from("theta,mu,p,dp\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            fmt(row.theta),
            row.mu,
            fmt(row.p),
            fmt(row.dp)
        ));
    }
    write_text(path, &text)?;
    validate_curves(path)
}

/// Re-reads a curve file and checks that the probabilities at every phase
/// sum to one within [`CURVE_SUM_TOL`].
pub fn validate_curves(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot re-read {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("theta,mu,p,dp") => {}
        other => bail!("{} has header {other:?}, expected theta,mu,p,dp", path.display()),
    }
    // Rows for one phase are contiguous; group on the exact theta text.
    let mut current: Option<(String, f64)> = None;
    let check = |group: &Option<(String, f64)>| -> Result<()> {
        if let Some((theta, sum)) = group {
            if (sum - 1.0).abs() > CURVE_SUM_TOL {
                bail!(
                    "{}: probabilities at theta {theta} sum to {sum:.12e}",
                    path.display()
                );
            }
        }
        Ok(())
    };
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("{} row {i} has {} fields", path.display(), fields.len());
        }
        let p: f64 = fields[2]
            .parse()
            .with_context(|| format!("{} row {i}: bad probability", path.display()))?;
        match &mut current {
            Some((theta, sum)) if theta == fields[0] => *sum += p,
            _ => {
                check(&current)?;
                current = Some((fields[0].to_string(), p));
            }
        }
    }
    check(&current)?;
    Ok(())
}

/// Writes `fisher.csv` with a 0/1 divergence flag per row.
pub fn write_fisher(path: &Path, rows: &[FisherRow]) -> Result<()> {
    let mut text = String::from("theta,f,flag\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{}\n",
            fmt(row.theta),
            fmt(row.f),
            u8::from(row.divergent)
        ));
    }
    write_text(path, &text)
}

pub const CAMPAIGN_HEADER: &str =
    "theta0,m,reps,ml_std,ml_bias,ml_dres,bayes_mean_c,bayes_c_std,bayes_dres";

/// Writes `campaign.csv`.
pub fn write_campaign(path: &Path, rows: &[CampaignRow]) -> Result<()> {
    let mut text = String::from(CAMPAIGN_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(row.theta0),
            row.m,
            row.reps,
            fmt(row.ml_std),
            fmt(row.ml_bias),
            fmt(row.ml_dres),
            fmt(row.bayes_mean_c),
            fmt(row.bayes_c_std),
            fmt(row.bayes_dres)
        ));
    }
    write_text(path, &text)
}

/// Writes an estimate histogram as `bin_lo,bin_hi,count` rows.
pub fn write_histogram(path: &Path, histogram: &Histogram) -> Result<()> {
    let bins = histogram.counts.len();
    let width = (histogram.hi - histogram.lo) / bins as f64;
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for (i, count) in histogram.counts.iter().enumerate() {
        let lo = histogram.lo + i as f64 * width;
        let hi = if i + 1 == bins { histogram.hi } else { histogram.lo + (i + 1) as f64 * width };
        text.push_str(&format!("{},{},{count}\n", fmt(lo), fmt(hi)));
    }
    write_text(path, &text)
}

/// Writes `summary.json`.
pub fn write_summary(path: &Path, summary: &SummaryFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_summary(path: &Path) -> Result<SummaryFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Writes `failures.json`; an empty list means the run completed in full.
pub fn write_failures(path: &Path, failures: &[FailureRecord]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(failures)?;
    text.push('\n');
    write_text(path, &text)
}

/// One source bundle inside a merged report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergedSummary {
    pub source: String,
    pub summary: SummaryFile,
}

/// Merges report bundles: campaign rows are concatenated in input order
/// into `campaign.csv`, and the per-bundle summaries are collected into
/// `summaries.json`.
pub fn merge_reports(inputs: &[PathBuf], out_dir: &Path) -> Result<()> {
    if inputs.is_empty() {
        bail!("need at least one bundle to merge");
    }
    let mut rows = String::new();
    let mut summaries = Vec::new();
    for input in inputs {
        let campaign = input.join("campaign.csv");
        let text = fs::read_to_string(&campaign)
            .with_context(|| format!("cannot read {}", campaign.display()))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(CAMPAIGN_HEADER) => {}
            other => bail!("{} has unexpected header {other:?}", campaign.display()),
        }
        for line in lines {
            rows.push_str(line);
            rows.push('\n');
        }
        let summary = read_summary(&input.join("summary.json"))?;
        let source = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.display().to_string());
        summaries.push(MergedSummary { source, summary });
    }
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut campaign_text = String::from(CAMPAIGN_HEADER);
    campaign_text.push('\n');
    campaign_text.push_str(&rows);
    write_text(&out_dir.join("campaign.csv"), &campaign_text)?;
    let mut summary_text = serde_json::to_string_pretty(&summaries)?;
    summary_text.push('\n');
    write_text(&out_dir.join("summaries.json"), &summary_text)?;
    Ok(())
}
