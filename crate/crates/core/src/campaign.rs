//! Repeated-estimation campaigns: draw many independent samples at a fixed
//! true phase, estimate each one, and summarize the scatter of the estimates
//! as a phase resolution.

use crate::error::{Error, Result};
use crate::estimation::{
    bayes_posterior, derive_seed, ml_estimate, sample_outcomes, ProbTable,
};

/// Number of bins used for estimate histograms.
pub const HISTOGRAM_BINS: usize = 50;

/// Which estimator a campaign runs on each repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    MaximumLikelihood,
    Bayesian,
}

/// Summary of the per-repetition credible-interval half-widths of a
/// Bayesian campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceStats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub values: Vec<f64>,
    /// Repetitions whose credible interval was truncated at a grid boundary.
    pub clipped: usize,
}

/// Fixed-width histogram over the estimate range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` into `bins` equal cells spanning their range. A
    /// degenerate range (all values equal) is widened to a unit interval so
    /// every value still lands in a bin.
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::Parameter("histogram needs values and at least one bin".into()));
        }
        let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Histogram { lo, hi, counts })
    }
}

/// Everything a campaign produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub protocol: Protocol,
    pub theta_true: f64,
    /// Events per repetition.
    pub m: usize,
    /// Repetitions attempted.
    pub repetitions: usize,
    /// One estimate per successful repetition.
    pub estimates: Vec<f64>,
    pub histogram: Histogram,
    /// Mean of the estimates.
    pub mean: f64,
    /// Sample standard deviation (n-1) of the estimates.
    pub std: f64,
    /// `mean - theta_true`.
    pub bias: f64,
    /// Single-event-equivalent resolution: `sqrt(m)` times the estimate
    /// scatter (maximum likelihood) or the mean credible half-width
    /// (Bayesian).
    pub delta_res: f64,
    /// Present for Bayesian campaigns.
    pub confidence: Option<ConfidenceStats>,
    /// Repetitions whose estimate failed and were skipped.
    pub failures: usize,
}

fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Estimation(format!(
            "{} usable repetitions cannot yield a scatter estimate",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

fn check_campaign_args(m: usize, repetitions: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Parameter("need at least one event per repetition".into()));
    }
    if repetitions < 2 {
        return Err(Error::Parameter("need at least two repetitions".into()));
    }
    Ok(())
}

/// Runs `repetitions` maximum-likelihood estimates of `theta_true`, each on
/// a fresh sample of `m` events, with per-repetition seeds derived from
/// `base_seed`.
pub fn ml_campaign(
    table: &ProbTable,
    theta_true: f64,
    m: usize,
    repetitions: usize,
    base_seed: u64,
) -> Result<CampaignReport> {
    check_campaign_args(m, repetitions)?;
    let n_outcomes = table.n_outcomes();
    let mut estimates = Vec::with_capacity(repetitions);
    let mut failures = 0usize;
    for rep in 0..repetitions {
        let seed = derive_seed(base_seed, rep as u64);
        let sample = sample_outcomes(table.model(), theta_true, m, seed)?;
        match ml_estimate(table, &sample.counts(n_outcomes)) {
            Ok(est) => estimates.push(est.theta_est),
            Err(_) => failures += 1,
        }
    }
    let (mean, std) = mean_std(&estimates)?;
    let histogram = Histogram::new(&estimates, HISTOGRAM_BINS)?;
    Ok(CampaignReport {
        protocol: Protocol::MaximumLikelihood,
        theta_true,
        m,
        repetitions,
        delta_res: (m as f64).sqrt() * std,
        estimates,
        histogram,
        mean,
        std,
        bias: mean - theta_true,
        confidence: None,
        failures,
    })
}

/// Bayesian counterpart of [`ml_campaign`]: each repetition contributes its
/// posterior maximum as the estimate and its credible half-width to the
/// confidence statistics.
pub fn bayes_campaign(
    table: &ProbTable,
    theta_true: f64,
    m: usize,
    repetitions: usize,
    base_seed: u64,
) -> Result<CampaignReport> {
    check_campaign_args(m, repetitions)?;
    let n_outcomes = table.n_outcomes();
    let mut estimates = Vec::with_capacity(repetitions);
    let mut widths = Vec::with_capacity(repetitions);
    let mut clipped = 0usize;
    let mut failures = 0usize;
    for rep in 0..repetitions {
        let seed = derive_seed(base_seed, rep as u64);
        let sample = sample_outcomes(table.model(), theta_true, m, seed)?;
        match bayes_posterior(table, &sample.counts(n_outcomes)) {
            Ok(post) => {
                estimates.push(post.theta_est);
                widths.push(post.confidence);
                clipped += usize::from(post.clipped);
            }
            Err(_) => failures += 1,
        }
    }
    let (mean, std) = mean_std(&estimates)?;
    let (c_mean, c_std) = mean_std(&widths)?;
    let histogram = Histogram::new(&estimates, HISTOGRAM_BINS)?;
    let stderr = c_std / (widths.len() as f64).sqrt();
    Ok(CampaignReport {
        protocol: Protocol::Bayesian,
        theta_true,
        m,
        repetitions,
        delta_res: (m as f64).sqrt() * c_mean,
        estimates,
        histogram,
        mean,
        std,
        bias: mean - theta_true,
        confidence: Some(ConfidenceStats {
            mean: c_mean,
            std: c_std,
            stderr,
            values: widths,
            clipped,
        }),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::ProbabilityModel;
    use crate::state::{CollectiveGenerator, LocalAxis, PureState};
    use std::f64::consts::PI;

    fn dicke_table() -> ProbTable {
        let probe = PureState::dicke(4, 2).unwrap().density();
        let generator = CollectiveGenerator::uniform(4, LocalAxis::Y).unwrap();
        let model = ProbabilityModel::new(probe, generator).unwrap();
        ProbTable::build(&model, 0.0, PI / 2.0, 2001).unwrap()
    }

    #[test]
    fn ml_scatter_tracks_the_information_limit() {
        let table = dicke_table();
        let report = ml_campaign(&table, 0.2 * PI, 100, 300, 11).unwrap();
        assert_eq!(report.protocol, Protocol::MaximumLikelihood);
        assert_eq!(report.estimates.len(), 300);
        assert_eq!(report.failures, 0);
        // Information limit: sqrt(m) * std -> 1/sqrt(12) = 0.2887.
        let target = 1.0 / 12.0_f64.sqrt();
        assert!(
            (report.delta_res - target).abs() < 0.15 * target,
            "delta_res {}",
            report.delta_res
        );
        // Bias should be within a few standard errors of zero.
        let stderr = report.std / (300.0_f64).sqrt();
        assert!(report.bias.abs() < 4.0 * stderr, "bias {}", report.bias);
    }

    #[test]
    fn campaigns_are_deterministic_in_the_base_seed() {
        let table = dicke_table();
        let a = ml_campaign(&table, 0.25 * PI, 50, 40, 7).unwrap();
        let b = ml_campaign(&table, 0.25 * PI, 50, 40, 7).unwrap();
        let c = ml_campaign(&table, 0.25 * PI, 50, 40, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.estimates, c.estimates);
    }

    #[test]
    fn repetition_streams_differ() {
        let table = dicke_table();
        let report = ml_campaign(&table, 0.2 * PI, 30, 50, 1).unwrap();
        // With independent streams the estimates cannot all coincide.
        assert!(report.std > 0.0);
    }

    #[test]
    fn bayes_confidence_matches_the_information_limit() {
        let table = dicke_table();
        let report = bayes_campaign(&table, 0.2 * PI, 100, 100, 13).unwrap();
        let stats = report.confidence.as_ref().expect("confidence stats");
        assert_eq!(stats.values.len(), 100);
        let target = 1.0 / (100.0_f64 * 12.0).sqrt();
        assert!(
            (stats.mean - target).abs() < 0.2 * target,
            "mean width {} vs {target}",
            stats.mean
        );
        assert!((report.delta_res - 10.0 * stats.mean).abs() < 1e-12);
        assert!(stats.stderr > 0.0 && stats.stderr < stats.std);
    }

    #[test]
    fn ml_resolution_definition_is_exact() {
        let table = dicke_table();
        let report = ml_campaign(&table, 0.3 * PI, 25, 60, 3).unwrap();
        assert!((report.delta_res - 5.0 * report.std).abs() < 1e-12);
        assert!(report.confidence.is_none());
    }

    #[test]
    fn histogram_covers_all_estimates() {
        let table = dicke_table();
        let report = ml_campaign(&table, 0.2 * PI, 40, 80, 19).unwrap();
        assert_eq!(report.histogram.counts.len(), HISTOGRAM_BINS);
        let total: u64 = report.histogram.counts.iter().sum();
        assert_eq!(total as usize, report.estimates.len());
        assert!(report.histogram.lo <= report.histogram.hi);
    }

    #[test]
    fn degenerate_histogram_range_is_widened() {
        let h = Histogram::new(&[0.7, 0.7, 0.7], 10).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        assert!(h.lo < 0.7 && h.hi > 0.7);
    }

    #[test]
    fn invalid_campaign_arguments_are_rejected() {
        let table = dicke_table();
        assert!(ml_campaign(&table, 0.2, 0, 10, 1).is_err());
        assert!(ml_campaign(&table, 0.2, 10, 1, 1).is_err());
        assert!(bayes_campaign(&table, 0.2, 0, 10, 1).is_err());
        assert!(Histogram::new(&[], 10).is_err());
        assert!(Histogram::new(&[1.0], 0).is_err());
    }
}
