//! Config-driven experiment runner.
//!
//! One run produces a complete report bundle in the configured output
//! directory:
//!
//! * `curves.csv` — outcome probabilities and derivatives over the phase
//!   interval (re-validated after writing),
//! * `fisher.csv` — the classical Fisher information over the same grid,
//! * `campaign.csv` — one row per `(theta0, m)` cell with both protocols,
//! * `hist_{ml,bayes}_t{i}_m{m}.csv` — estimate histograms per cell,
//! * `summary.json` — QFI at configured and optimized axes, entanglement
//!   depth, producibility bounds, and (for four qubits) the fidelity
//!   witness,
//! * `failures.json` — cells or repetitions that could not be completed;
//!   failures are recorded and the run continues.
//!
//! All randomness flows from `base_seed` through a fixed per-cell schedule,
//! so two runs of the same configuration produce byte-identical bundles.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};

use qmetro::{
    bayes_campaign, classify_depth, derive_seed, ml_campaign, optimize_axes, qfi, witness_value,
    CampaignReport, ProbTable,
};

use crate::config::ExperimentConfig;
use crate::report::{
    self, CampaignRow, CurveRow, FailureRecord, FisherRow, SummaryFile, SCHEMA_VERSION,
};

/// Convergence tolerance handed to the axis optimizer.
const OPTIMIZER_TOL: f64 = 1e-10;

/// What a finished run reports back to the caller.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: SummaryFile,
    /// Number of `(theta0, m)` campaign cells attempted.
    pub cells: usize,
    /// Number of failure records written to `failures.json`.
    pub failures: usize,
    /// Tomography repair warnings from loading the probe, if any.
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Runs the full experiment described by `config` and writes the report
/// bundle. Individual campaign cells that fail are recorded in
/// `failures.json` without aborting the rest of the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (model, warnings) = config.build_model()?;
    let n = model.n_qubits();
    let [lo, hi] = config.interval;

    let qfi_fixed = qfi(model.effective_probe(), model.generator())?;
    let optimized = optimize_axes(model.effective_probe(), config.restarts, OPTIMIZER_TOL)?;
    let depth = classify_depth(optimized.value, n)?;
    let witness = if n == 4 { Some(witness_value(model.effective_probe())?) } else { None };
    let summary = SummaryFile {
        schema_version: SCHEMA_VERSION,
        qfi: qfi_fixed,
        qfi_opt: optimized.value,
        opt_axes: optimized.axes.iter().map(|a| a.components()).collect(),
        depth: depth.certified_depth,
        bounds: depth.bounds_table,
        witness,
    };

    let out = &config.output_dir;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let outcomes = model.measurement().outcomes().to_vec();
    let mut curve_rows = Vec::with_capacity(config.curve_points * outcomes.len());
    let mut fisher_rows = Vec::with_capacity(config.curve_points);
    for theta in linspace(lo, hi, config.curve_points) {
        let ps = model.outcome_probabilities(theta)?;
        let dps = model.outcome_derivatives(theta)?;
        for ((&mu, &p), &dp) in outcomes.iter().zip(&ps).zip(&dps) {
            curve_rows.push(CurveRow { theta, mu, p, dp });
        }
        let info = model.fisher_information(theta)?;
        fisher_rows.push(FisherRow { theta, f: info.value, divergent: info.divergent });
    }
    report::write_curves(&out.join("curves.csv"), &curve_rows)?;
    report::write_fisher(&out.join("fisher.csv"), &fisher_rows)?;

    let table = ProbTable::build(&model, lo, hi, config.grid_points)?;
    let mut campaign_rows = Vec::new();
    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut cells = 0usize;
    for (i, &theta0) in config.theta0_list.iter().enumerate() {
        for (j, &m) in config.m_list.iter().enumerate() {
            let cell = (i * config.m_list.len() + j) as u64;
            let ml_seed = derive_seed(config.base_seed, 2 * cell);
            let bayes_seed = derive_seed(config.base_seed, 2 * cell + 1);
            cells += 1;

            let record = |protocol: &str, error: String, failures: &mut Vec<FailureRecord>| {
                failures.push(FailureRecord {
                    theta0,
                    m,
                    protocol: protocol.into(),
                    error,
                });
            };
            let finish =
                |label: &str, result: qmetro::Result<CampaignReport>, failures: &mut Vec<FailureRecord>| -> Result<Option<CampaignReport>> {
                    match result {
                        Ok(rep) => {
                            if rep.failures > 0 {
                                record(
                                    label,
                                    format!("{} of {} repetitions failed", rep.failures, rep.repetitions),
                                    failures,
                                );
                            }
                            let name = format!("hist_{label}_t{i}_m{m}.csv");
                            report::write_histogram(&out.join(name), &rep.histogram)?;
                            Ok(Some(rep))
                        }
                        Err(e) => {
                            record(label, e.to_string(), failures);
                            Ok(None)
                        }
                    }
                };

            let ml = finish("ml", ml_campaign(&table, theta0, m, config.repetitions, ml_seed), &mut failures)?;
            let bayes = finish(
                "bayes",
                bayes_campaign(&table, theta0, m, config.repetitions, bayes_seed),
                &mut failures,
            )?;
            if let (Some(ml), Some(bayes)) = (ml, bayes) {
                let stats = bayes.confidence.as_ref().expect("bayes campaign carries confidence");
                campaign_rows.push(CampaignRow {
                    theta0,
                    m,
                    reps: config.repetitions,
                    ml_std: ml.std,
                    ml_bias: ml.bias,
                    ml_dres: ml.delta_res,
                    bayes_mean_c: stats.mean,
                    bayes_c_std: stats.std,
                    bayes_dres: bayes.delta_res,
                });
            }
        }
    }
    report::write_campaign(&out.join("campaign.csv"), &campaign_rows)?;
    report::write_failures(&out.join("failures.json"), &failures)?;
    report::write_summary(&out.join("summary.json"), &summary)?;

    Ok(RunOutcome {
        summary,
        cells,
        failures: failures.len(),
        warnings,
        output_dir: out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_config(dir: &std::path::Path) -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.theta0_list = vec![0.1 * PI, 0.2 * PI];
        config.m_list = vec![1, 10];
        config.repetitions = 40;
        config.curve_points = 41;
        config.grid_points = 401;
        config.restarts = 2;
        config.output_dir = dir.join("bundle");
        config
    }

    #[test]
    fn run_writes_a_complete_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let outcome = run_experiment(&config).unwrap();

        assert_eq!(outcome.cells, 4);
        assert_eq!(outcome.failures, 0);
        assert!((outcome.summary.qfi - 12.0).abs() < 1e-8);
        assert!((outcome.summary.qfi_opt - 12.0).abs() < 1e-6);
        assert_eq!(outcome.summary.depth, 4);
        let witness = outcome.summary.witness.unwrap();
        assert!((witness - (2.0 / 3.0 - 1.0)).abs() < 1e-10, "pure probe witness {witness}");

        let out = &config.output_dir;
        for name in ["curves.csv", "fisher.csv", "campaign.csv", "summary.json", "failures.json"] {
            assert!(out.join(name).is_file(), "missing {name}");
        }
        for i in 0..2 {
            for m in [1, 10] {
                assert!(out.join(format!("hist_ml_t{i}_m{m}.csv")).is_file());
                assert!(out.join(format!("hist_bayes_t{i}_m{m}.csv")).is_file());
            }
        }
        let campaign = fs::read_to_string(out.join("campaign.csv")).unwrap();
        assert_eq!(campaign.lines().count(), 5, "header plus one row per cell");
        let failures = fs::read_to_string(out.join("failures.json")).unwrap();
        assert_eq!(failures, "[]\n");
        let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
        assert_eq!(curves.lines().count(), 1 + 41 * 5);
    }

    #[test]
    fn summary_reflects_white_noise() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.noise.white_noise = 0.2;
        config.theta0_list = vec![0.2 * PI];
        config.m_list = vec![10];
        let outcome = run_experiment(&config).unwrap();
        assert!(
            outcome.summary.qfi <= 0.8 * 12.0 + 1e-8,
            "white noise must not raise the information: {}",
            outcome.summary.qfi
        );
        assert!(outcome.summary.qfi > 6.0, "sanity: {}", outcome.summary.qfi);
    }
}
