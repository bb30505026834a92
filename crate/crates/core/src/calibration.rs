//! Fits the noise parameters of the apparatus — rotation-angle offsets,
//! white-noise weight, and visibility — to measured fringe data by
//! least-squares on the outcome frequencies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::{derive_seed, sample_outcomes};
use crate::interferometer::{NoiseModel, ProbabilityModel};

const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-9;
const GRAD_TOL: f64 = 1e-12;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;
const JACOBIAN_STEP: f64 = 1e-6;
const TILT_BOUND: f64 = 0.8;

/// Measured outcome counts at a set of probe phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData {
    thetas: Vec<f64>,
    counts: Vec<Vec<u64>>,
    totals: Vec<u64>,
}

impl CalibrationData {
    /// `counts[i][k]` is the number of events for outcome index `k` at
    /// phase `thetas[i]`. Every phase needs at least one event.
    pub fn new(thetas: Vec<f64>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if thetas.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: thetas.len(),
                actual: counts.len(),
            });
        }
        if thetas.is_empty() {
            return Err(Error::Parameter("calibration needs at least one phase".into()));
        }
        let width = counts[0].len();
        if counts.iter().any(|row| row.len() != width) {
            return Err(Error::Parameter("ragged calibration count rows".into()));
        }
        let totals: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        if let Some(i) = totals.iter().position(|&t| t == 0) {
            return Err(Error::Parameter(format!(
                "phase {} ({}) recorded no events",
                i, thetas[i]
            )));
        }
        Ok(CalibrationData { thetas, counts, totals })
    }

    /// Builds the table from `(theta, mu, count)` rows, such as a parsed
    /// counts file. Phases are kept in order of first appearance and repeated
    /// `(theta, mu)` rows accumulate.
    pub fn from_rows(n_qubits: usize, rows: &[(f64, i32, u64)]) -> Result<Self> {
        if n_qubits == 0 || n_qubits % 2 != 0 {
            return Err(Error::Parameter(format!(
                "imbalance outcomes need an even positive qubit count, got {n_qubits}"
            )));
        }
        let half = (n_qubits / 2) as i32;
        let width = n_qubits + 1;
        let mut thetas: Vec<f64> = Vec::new();
        let mut counts: Vec<Vec<u64>> = Vec::new();
        for &(theta, mu, count) in rows {
            if mu < -half || mu > half {
                return Err(Error::Parameter(format!("outcome {mu} out of range")));
            }
            let slot = match thetas.iter().position(|&t| t == theta) {
                Some(i) => i,
                None => {
                    thetas.push(theta);
                    counts.push(vec![0; width]);
                    thetas.len() - 1
                }
            };
            counts[slot][(mu + half) as usize] += count;
        }
        CalibrationData::new(thetas, counts)
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn n_phases(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.counts[0].len()
    }

    fn frequencies(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(row, &t)| row.iter().map(|&c| c as f64 / t as f64).collect())
            .collect()
    }
}

/// How the rotation-angle offsets are parameterized in the fit.
///
/// With a permutation-symmetric probe the outcome curves depend on the
/// per-qubit offsets only weakly beyond their sum, so [`TiltMode::PerQubit`]
/// is poorly conditioned there: the fitted individual offsets are not
/// trustworthy even though their mean is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltMode {
    None,
    Collective,
    PerQubit,
}

/// Which noise parameters the fit may vary; everything else is held at its
/// noise-free value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitFamily {
    pub tilt: TiltMode,
    pub fit_white_noise: bool,
    pub fit_visibility: bool,
}

impl FitFamily {
    /// Collective offset plus white noise; the usual first fit.
    pub fn standard() -> Self {
        FitFamily { tilt: TiltMode::Collective, fit_white_noise: true, fit_visibility: false }
    }

    /// Everything the model supports, with a collective offset.
    pub fn full() -> Self {
        FitFamily { tilt: TiltMode::Collective, fit_white_noise: true, fit_visibility: true }
    }

    fn n_tilts(&self, n_qubits: usize) -> usize {
        match self.tilt {
            TiltMode::None => 0,
            TiltMode::Collective => 1,
            TiltMode::PerQubit => n_qubits,
        }
    }

    fn n_params(&self, n_qubits: usize) -> usize {
        self.n_tilts(n_qubits)
            + usize::from(self.fit_white_noise)
            + usize::from(self.fit_visibility)
    }

    fn initial(&self, n_qubits: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n_tilts(n_qubits)];
        if self.fit_white_noise {
            x.push(0.05);
        }
        if self.fit_visibility {
            x.push(0.95);
        }
        x
    }

    fn bounds(&self, n_qubits: usize) -> Vec<(f64, f64)> {
        let mut b = vec![(-TILT_BOUND, TILT_BOUND); self.n_tilts(n_qubits)];
        if self.fit_white_noise {
            b.push((0.0, 1.0));
        }
        if self.fit_visibility {
            b.push((0.0, 1.0));
        }
        b
    }

    fn unpack(&self, n_qubits: usize, x: &[f64]) -> NoiseModel {
        let n_tilts = self.n_tilts(n_qubits);
        let misalignment = x[..n_tilts].to_vec();
        let mut rest = x[n_tilts..].iter();
        let white_noise = if self.fit_white_noise { *rest.next().unwrap() } else { 0.0 };
        let visibility = if self.fit_visibility { *rest.next().unwrap() } else { 1.0 };
        NoiseModel { misalignment, white_noise, visibility }
    }
}

/// Outcome of a calibration fit.
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    /// Best-fit noise parameters.
    pub noise: NoiseModel,
    /// The base model with the fitted noise attached.
    pub model: ProbabilityModel,
    /// Root-mean-square frequency residual at the optimum.
    pub residual_rms: f64,
    /// Levenberg-Marquardt iterations used.
    pub iterations: usize,
}

/// Fits the selected noise parameters of `base` to `data` by unweighted
/// least squares on the outcome frequencies, using Levenberg-Marquardt with
/// a numerical Jacobian and box constraints on the parameters.
pub fn fit_calibration(
    base: &ProbabilityModel,
    data: &CalibrationData,
    family: &FitFamily,
) -> Result<CalibrationFit> {
    let n = base.n_qubits();
    if data.n_outcomes() != base.measurement().outcomes().len() {
        return Err(Error::DimensionMismatch {
            expected: base.measurement().outcomes().len(),
            actual: data.n_outcomes(),
        });
    }
    let n_params = family.n_params(n);
    if n_params == 0 {
        return Err(Error::Parameter("fit family has no free parameters".into()));
    }
    let n_res = data.n_phases() * data.n_outcomes();
    if n_res < n_params {
        return Err(Error::Parameter(format!(
            "{n_res} data points cannot determine {n_params} parameters"
        )));
    }

    let freqs = data.frequencies();
    let bounds = family.bounds(n);
    let residuals = |x: &[f64]| -> Result<DVector<f64>> {
        let model = base.with_noise(family.unpack(n, x))?;
        let mut r = DVector::zeros(n_res);
        for (i, &theta) in data.thetas().iter().enumerate() {
            let probs = model.outcome_probabilities(theta)?;
            for (k, p) in probs.iter().enumerate() {
                r[i * data.n_outcomes() + k] = freqs[i][k] - p;
            }
        }
        Ok(r)
    };

    let mut x = family.initial(n);
    let mut r = residuals(&x)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = LAMBDA_INIT;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;

        // Forward-difference Jacobian, stepping inward at an active bound.
        let mut jac = DMatrix::zeros(n_res, n_params);
        for j in 0..n_params {
            let h = if x[j] + JACOBIAN_STEP <= bounds[j].1 {
                JACOBIAN_STEP
            } else {
                -JACOBIAN_STEP
            };
            let mut xp = x.clone();
            xp[j] += h;
            let rp = residuals(&xp)?;
            for i in 0..n_res {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }

        let grad = jac.transpose() * &r;
        if grad.amax() < GRAD_TOL {
            break;
        }
        let hessian = jac.transpose() * &jac;

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = hessian.clone();
            for d in 0..n_params {
                damped[(d, d)] += lambda * hessian[(d, d)].max(1e-12);
            }
            let step = match damped.lu().solve(&(-&grad)) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut x_new = x.clone();
            for j in 0..n_params {
                x_new[j] = (x[j] + step[j]).clamp(bounds[j].0, bounds[j].1);
            }
            let r_new = residuals(&x_new)?;
            let cost_new = 0.5 * r_new.norm_squared();
            if cost_new < cost {
                let step_size = x_new
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                let improvement = cost - cost_new;
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step_size < STEP_TOL || improvement < 1e-16 * (1.0 + cost) {
                    let rms = (2.0 * cost / n_res as f64).sqrt();
                    let noise = family.unpack(n, &x);
                    let model = base.with_noise(noise.clone())?;
                    return Ok(CalibrationFit { noise, model, residual_rms: rms, iterations });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // Damping exhausted without progress: the current point is as
            // good as this search gets.
            break;
        }
    }

    let rms = (2.0 * cost / n_res as f64).sqrt();
    if iterations >= MAX_ITERATIONS {
        return Err(Error::FitDidNotConverge { iterations, residual_rms: rms });
    }
    let noise = family.unpack(n, &x);
    let model = base.with_noise(noise.clone())?;
    Ok(CalibrationFit { noise, model, residual_rms: rms, iterations })
}

/// Draws a synthetic calibration data set from `model`: `events_per_phase`
/// outcomes at every phase in `thetas`, with per-phase seeds derived from
/// `seed`.
pub fn synthesize_calibration(
    model: &ProbabilityModel,
    thetas: &[f64],
    events_per_phase: usize,
    seed: u64,
) -> Result<CalibrationData> {
    if thetas.is_empty() || events_per_phase == 0 {
        return Err(Error::Parameter("need at least one phase and one event".into()));
    }
    let n_outcomes = model.measurement().outcomes().len();
    let mut counts = Vec::with_capacity(thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let sample = sample_outcomes(model, theta, events_per_phase, derive_seed(seed, i as u64))?;
        counts.push(sample.counts(n_outcomes));
    }
    CalibrationData::new(thetas.to_vec(), counts)
}
