//! Phase estimation from measured outcome records: grid-based maximum
//! likelihood with quadratic refinement, a Bayesian posterior with a
//! symmetric credible interval, and the bias-corrected Cramer-Rao bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interferometer::ProbabilityModel;

/// Default number of grid points for likelihood scans.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Probabilities are floored at this value inside logarithms so that a grid
/// point where one outcome is impossible scores `-inf`-like but finite.
pub const LOG_FLOOR: f64 = 1e-300;

/// Any outcome whose probability never rises above this anywhere on the grid
/// cannot have been produced by the model; observing it is an error rather
/// than a very unlikely event.
const IMPOSSIBLE_CEILING: f64 = 1e-250;

/// Two-sided one-standard-deviation mass of a normal distribution; the target
/// coverage of the Bayesian credible interval.
const CONFIDENCE_MASS: f64 = 0.682_689_492_137_085_9;

/// Relative log-likelihood margin below which two grid points count as tied.
/// Keeps plateau likelihoods (flat up to floating-point noise) resolving to
/// the smallest phase instead of to whichever point the noise favors.
const TIE_EPS: f64 = 1e-12;

/// Relative density margin for detecting posterior plateaus; grid points
/// this close to the maximum count as part of one flat top.
const PLATEAU_EPS: f64 = 1e-9;

/// Derives an independent stream seed from a base seed and an index using
/// the splitmix64 finalizer, so repeated draws of a campaign never share or
/// correlate their random streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A finite record of measurement outcomes drawn at a fixed true phase.
/// `outcomes` holds indices into the measurement's outcome list.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSample {
    pub theta_true: f64,
    pub outcomes: Vec<usize>,
    pub seed: u64,
}

impl OutcomeSample {
    /// Per-outcome counts, with `n_outcomes` entries.
    pub fn counts(&self, n_outcomes: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n_outcomes];
        for &k in &self.outcomes {
            counts[k] += 1;
        }
        counts
    }
}

/// Draws `m` independent outcomes from the model at `theta_true` using a
/// deterministic stream seeded by `seed`.
pub fn sample_outcomes(
    model: &ProbabilityModel,
    theta_true: f64,
    m: usize,
    seed: u64,
) -> Result<OutcomeSample> {
    let probs = model.outcome_probabilities(theta_true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = k;
                break;
            }
        }
        outcomes.push(chosen);
    }
    Ok(OutcomeSample { theta_true, outcomes, seed })
}

/// Precomputed outcome probabilities (and their logs) on a uniform phase
/// grid, shared across the many estimates of a campaign.
#[derive(Debug, Clone)]
pub struct ProbTable {
    model: ProbabilityModel,
    thetas: Vec<f64>,
    log_probs: Vec<Vec<f64>>,
    max_prob_per_outcome: Vec<f64>,
}

impl ProbTable {
    pub fn build(model: &ProbabilityModel, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::Parameter(format!(
                "invalid phase interval [{lo}, {hi}]"
            )));
        }
        if points < 3 {
            return Err(Error::Parameter(format!(
                "grid needs at least 3 points, got {points}"
            )));
        }
        let n_outcomes = model.measurement().outcomes().len();
        let step = (hi - lo) / (points - 1) as f64;
        let mut thetas = Vec::with_capacity(points);
        let mut log_probs = Vec::with_capacity(points);
        let mut max_prob_per_outcome = vec![0.0f64; n_outcomes];
        for i in 0..points {
            let theta = if i + 1 == points { hi } else { lo + i as f64 * step };
            let probs = model.outcome_probabilities(theta)?;
            for (m, p) in max_prob_per_outcome.iter_mut().zip(&probs) {
                *m = m.max(*p);
            }
            log_probs.push(probs.iter().map(|p| p.max(LOG_FLOOR).ln()).collect());
            thetas.push(theta);
        }
        Ok(ProbTable { model: model.clone(), thetas, log_probs, max_prob_per_outcome })
    }

    pub fn model(&self) -> &ProbabilityModel {
        &self.model
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn n_outcomes(&self) -> usize {
        self.max_prob_per_outcome.len()
    }

    fn check_counts(&self, counts: &[u64]) -> Result<()> {
        if counts.len() != self.n_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outcomes(),
                actual: counts.len(),
            });
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Estimation("no recorded events".into()));
        }
        for (k, &c) in counts.iter().enumerate() {
            if c > 0 && self.max_prob_per_outcome[k] < IMPOSSIBLE_CEILING {
                return Err(Error::Estimation(format!(
                    "outcome index {k} was observed {c} times but has zero probability \
                     everywhere on the grid"
                )));
            }
        }
        Ok(())
    }

    /// Log-likelihood of `counts` at every grid point.
    pub fn log_likelihoods(&self, counts: &[u64]) -> Result<Vec<f64>> {
        self.check_counts(counts)?;
        Ok(self
            .log_probs
            .iter()
            .map(|row| {
                row.iter()
                    .zip(counts)
                    .map(|(lp, &c)| c as f64 * lp)
                    .sum()
            })
            .collect())
    }

    /// Exact (off-grid) log-likelihood, used to confirm refinement steps.
    fn exact_log_likelihood(&self, counts: &[u64], theta: f64) -> Result<f64> {
        let probs = self.model.outcome_probabilities(theta)?;
        Ok(probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| c as f64 * p.max(LOG_FLOOR).ln())
            .sum())
    }
}

/// Maximum-likelihood result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEstimate {
    pub theta_est: f64,
    pub log_likelihood: f64,
}

/// Maximum-likelihood phase estimate: argmax over the grid (ties resolved to
/// the smallest phase), then one quadratic interpolation step through the
/// three bracketing points, kept only when it genuinely raises the exact
/// likelihood.
pub fn ml_estimate(table: &ProbTable, counts: &[u64]) -> Result<MlEstimate> {
    let loglik = table.log_likelihoods(counts)?;
    let mut best = 0usize;
    for (i, l) in loglik.iter().enumerate() {
        if *l > loglik[best] + TIE_EPS * (1.0 + loglik[best].abs()) {
            best = i;
        }
    }
    let thetas = table.thetas();
    let mut theta_est = thetas[best];
    let mut best_ll = loglik[best];

    if best > 0 && best + 1 < thetas.len() {
        let (fm, f0, fp) = (loglik[best - 1], loglik[best], loglik[best + 1]);
        let denom = fm - 2.0 * f0 + fp;
        if denom < 0.0 {
            let offset = 0.5 * (fm - fp) / denom;
            if offset.abs() <= 0.5 {
                let step = thetas[best + 1] - thetas[best];
                let candidate = (thetas[best] + offset * step)
                    .clamp(thetas[0], thetas[thetas.len() - 1]);
                let candidate_ll = table.exact_log_likelihood(counts, candidate)?;
                if candidate_ll >= best_ll {
                    theta_est = candidate;
                    best_ll = candidate_ll;
                }
            }
        }
    }

    Ok(MlEstimate { theta_est, log_likelihood: best_ll })
}

/// Bayesian posterior over the grid under a flat prior.
///
/// `theta_est` is the posterior maximum (quadratic-refined; a flat top
/// resolves to its middle grid point) and `confidence` the half-width of the
/// symmetric interval around it holding 68.27% of the posterior mass. When
/// that interval runs into a grid boundary it is completed one-sidedly and
/// `clipped` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesPosterior {
    pub thetas: Vec<f64>,
    pub density: Vec<f64>,
    pub theta_est: f64,
    pub confidence: f64,
    pub clipped: bool,
}

pub fn bayes_posterior(table: &ProbTable, counts: &[u64]) -> Result<BayesPosterior> {
    let loglik = table.log_likelihoods(counts)?;
    let thetas = table.thetas().to_vec();
    let peak = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut density: Vec<f64> = loglik.iter().map(|l| (l - peak).exp()).collect();

    let total = trapezoid(&thetas, &density);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Estimation(
            "posterior mass vanished; likelihood underflowed everywhere".into(),
        ));
    }
    for d in &mut density {
        *d /= total;
    }

    // Posterior maximum. Plateaus (flat up to PLATEAU_EPS, e.g. a
    // rotation-invariant probe) resolve to the middle of the flat region.
    let d_max = density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = density
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= d_max * (1.0 - PLATEAU_EPS))
        .map(|(i, _)| i)
        .collect();
    let best = tied[tied.len() / 2];
    let mut theta_est = thetas[best];
    if tied.len() == 1 && best > 0 && best + 1 < thetas.len() {
        let (fm, f0, fp) = (loglik[best - 1], loglik[best], loglik[best + 1]);
        let denom = fm - 2.0 * f0 + fp;
        if denom < 0.0 {
            let offset = 0.5 * (fm - fp) / denom;
            if offset.abs() <= 0.5 {
                let step = thetas[best + 1] - thetas[best];
                theta_est = (thetas[best] + offset * step)
                    .clamp(thetas[0], thetas[thetas.len() - 1]);
            }
        }
    }

    let cumulative = cumulative_trapezoid(&thetas, &density);
    let lo = thetas[0];
    let hi = thetas[thetas.len() - 1];
    let mass_within = |w: f64| -> f64 {
        let a = (theta_est - w).max(lo);
        let b = (theta_est + w).min(hi);
        interp_cumulative(&thetas, &density, &cumulative, b)
            - interp_cumulative(&thetas, &density, &cumulative, a)
    };

    let mut w_lo = 0.0;
    let mut w_hi = hi - lo;
    for _ in 0..100 {
        let mid = 0.5 * (w_lo + w_hi);
        if mass_within(mid) >= CONFIDENCE_MASS {
            w_hi = mid;
        } else {
            w_lo = mid;
        }
    }
    let confidence = w_hi;
    let clipped = theta_est - confidence < lo - 1e-12 || theta_est + confidence > hi + 1e-12;

    Ok(BayesPosterior { thetas, density, theta_est, confidence, clipped })
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `c[i]` = integral of `y` from `x[0]` to `x[i]`.
fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    c.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        c.push(acc);
    }
    c
}

/// Integral of `y` from `x[0]` to `point`, with linear interpolation inside
/// the containing grid cell.
fn interp_cumulative(x: &[f64], y: &[f64], cumulative: &[f64], point: f64) -> f64 {
    let n = x.len();
    if point <= x[0] {
        return 0.0;
    }
    if point >= x[n - 1] {
        return cumulative[n - 1];
    }
    let i = match x.binary_search_by(|t| t.partial_cmp(&point).unwrap()) {
        Ok(i) => return cumulative[i],
        Err(i) => i - 1,
    };
    let dx = x[i + 1] - x[i];
    let t = (point - x[i]) / dx;
    let y_at = y[i] + t * (y[i + 1] - y[i]);
    cumulative[i] + 0.5 * (point - x[i]) * (y[i] + y_at)
}

/// Empirical estimator bias `E[theta_est] - theta` tabulated on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasCurve {
    thetas: Vec<f64>,
    biases: Vec<f64>,
}

impl BiasCurve {
    pub fn new(thetas: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if thetas.len() != biases.len() {
            return Err(Error::DimensionMismatch {
                expected: thetas.len(),
                actual: biases.len(),
            });
        }
        if thetas.len() < 2 {
            return Err(Error::Parameter(
                "bias curve needs at least 2 points to differentiate".into(),
            ));
        }
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("bias-curve phases must be strictly increasing".into()));
        }
        Ok(BiasCurve { thetas, biases })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

/// Cramer-Rao bound on the standard deviation, corrected for estimator bias.
///
/// `one_sided` is set when the bias slope came from a one-sided difference
/// because the phase sits at an edge of the tabulated curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedCrlb {
    pub value: f64,
    pub one_sided: bool,
}

/// Evaluates `|1 + b'(theta)| / sqrt(m F)` with the bias slope taken from
/// the tabulated curve at the grid point nearest to `theta0`.
///
/// The numerator is the slope of the estimator's mean response
/// `d<theta_est>/d theta = 1 + b'`: a biased estimator whose mean response is
/// compressed (`b' < 0`) genuinely beats the unbiased bound, which is how
/// sub-Cramer-Rao scatter at small sample sizes is explained. (With the
/// present sign convention `b = <theta_est> - theta`, forms with a minus sign
/// in the numerator would assign a constant estimator a positive lower bound
/// even though its variance is zero.)
pub fn bias_corrected_crlb(
    curve: &BiasCurve,
    theta0: f64,
    m: usize,
    fisher: f64,
) -> Result<CorrectedCrlb> {
    if m == 0 {
        return Err(Error::Parameter("need at least one event per estimate".into()));
    }
    if !(fisher.is_finite() && fisher > 0.0) {
        return Err(Error::Estimation(format!(
            "Fisher information must be positive to bound the error, got {fisher}"
        )));
    }
    let thetas = &curve.thetas;
    let biases = &curve.biases;
    let n = thetas.len();
    let mut nearest = 0usize;
    for (i, t) in thetas.iter().enumerate() {
        if (t - theta0).abs() < (thetas[nearest] - theta0).abs() {
            nearest = i;
        }
    }
    let (slope, one_sided) = if nearest == 0 {
        ((biases[1] - biases[0]) / (thetas[1] - thetas[0]), true)
    } else if nearest == n - 1 {
        ((biases[n - 1] - biases[n - 2]) / (thetas[n - 1] - thetas[n - 2]), true)
    } else {
        (
            (biases[nearest + 1] - biases[nearest - 1])
                / (thetas[nearest + 1] - thetas[nearest - 1]),
            false,
        )
    };
    let value = (1.0 + slope).abs() / (m as f64 * fisher).sqrt();
    Ok(CorrectedCrlb { value, one_sided })
}
