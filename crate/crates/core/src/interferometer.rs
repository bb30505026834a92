//! Forward model of the interferometer: collective rotation of a probe state,
//! parity-sector polarization measurement, optional noise, and the classical
//! Fisher information of the resulting outcome distribution.
//!
//! The measurement resolves the imbalance `mu = (N_H - N_V)/2` between
//! horizontally and vertically polarized photons, so its projectors are the
//! computational-basis sectors of fixed excitation number `N/2 - mu`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{embed_single_qubit, evolve, CollectiveGenerator, DensityMatrix};

/// Probabilities below this threshold are treated as zero in Fisher sums.
pub const PROB_EPS: f64 = 1e-12;

/// Derivative magnitudes below this threshold are treated as vanishing when
/// the matching probability is zero.
pub const DERIV_EPS: f64 = 1e-9;

/// Projective measurement of the half-imbalance `mu` between `H` and `V`
/// photons. Each outcome projects onto the basis strings with `N/2 - mu`
/// qubits in `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    n_qubits: usize,
    outcomes: Vec<i32>,
    sectors: Vec<Vec<usize>>,
}

impl MeasurementModel {
    /// Builds the sector projectors for an even number of qubits. Odd counts
    /// have half-integer imbalance and are rejected.
    pub fn projectors(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits % 2 != 0 {
            return Err(Error::Parameter(format!(
                "imbalance measurement needs an even positive qubit count, got {n_qubits}"
            )));
        }
        let half = (n_qubits / 2) as i32;
        let dim = 1usize << n_qubits;
        let outcomes: Vec<i32> = (-half..=half).collect();
        let mut sectors = vec![Vec::new(); outcomes.len()];
        for basis in 0..dim {
            let weight = basis.count_ones() as i32;
            let mu = half - weight;
            let index = (mu + half) as usize;
            sectors[index].push(basis);
        }
        Ok(MeasurementModel { n_qubits, outcomes, sectors })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    /// All outcomes in ascending order, `-N/2 ..= N/2`.
    pub fn outcomes(&self) -> &[i32] {
        &self.outcomes
    }

    pub fn index_of(&self, mu: i32) -> Option<usize> {
        let half = (self.n_qubits / 2) as i32;
        if mu < -half || mu > half {
            None
        } else {
            Some((mu + half) as usize)
        }
    }

    /// Basis indices spanned by the projector for `mu`.
    pub fn sector(&self, mu: i32) -> Result<&[usize]> {
        self.index_of(mu)
            .map(|i| self.sectors[i].as_slice())
            .ok_or_else(|| Error::Parameter(format!("outcome {mu} out of range")))
    }

    pub fn rank(&self, mu: i32) -> Result<usize> {
        Ok(self.sector(mu)?.len())
    }

    /// Materializes the diagonal 0/1 projector matrix for `mu`.
    pub fn projector(&self, mu: i32) -> Result<DMatrix<Complex64>> {
        let sector = self.sector(mu)?;
        let dim = self.dim();
        let mut p = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for &basis in sector {
            p[(basis, basis)] = Complex64::new(1.0, 0.0);
        }
        Ok(p)
    }
}

/// Imperfections of the real apparatus, applied on top of the ideal protocol.
///
/// * `misalignment`: per-qubit angular offsets (radians) of the local
///   rotations, so qubit `k` is rotated by `theta + tau_k` about its axis. An
///   empty list means no offset; a single entry is broadcast to all qubits.
/// * `white_noise`: weight of the maximally mixed admixture, in `[0, 1]`.
/// * `visibility`: damping factor applied to the probe's off-diagonal
///   entries, in `[0, 1]` with 1 meaning no damping.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub misalignment: Vec<f64>,
    pub white_noise: f64,
    pub visibility: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::none()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel { misalignment: Vec::new(), white_noise: 0.0, visibility: 1.0 }
    }

    /// The same angular offset on every qubit.
    pub fn collective_tilt(tilt: f64) -> Self {
        NoiseModel { misalignment: vec![tilt], white_noise: 0.0, visibility: 1.0 }
    }

    pub fn with_white_noise(mut self, p: f64) -> Self {
        self.white_noise = p;
        self
    }

    pub fn with_visibility(mut self, v: f64) -> Self {
        self.visibility = v;
        self
    }

    pub fn with_misalignment(mut self, tilts: Vec<f64>) -> Self {
        self.misalignment = tilts;
        self
    }

    /// True when the model changes nothing.
    pub fn is_trivial(&self) -> bool {
        self.white_noise == 0.0
            && self.visibility == 1.0
            && self.misalignment.iter().all(|&t| t == 0.0)
    }

    /// Offsets expanded to one entry per qubit.
    pub fn tilts_for(&self, n_qubits: usize) -> Result<Vec<f64>> {
        match self.misalignment.len() {
            0 => Ok(vec![0.0; n_qubits]),
            1 => Ok(vec![self.misalignment[0]; n_qubits]),
            len if len == n_qubits => Ok(self.misalignment.clone()),
            len => Err(Error::DimensionMismatch { expected: n_qubits, actual: len }),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.white_noise) {
            return Err(Error::Parameter(format!(
                "white-noise weight {} outside [0, 1]",
                self.white_noise
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::Parameter(format!(
                "visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        if self.misalignment.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("misalignment offsets must be finite".into()));
        }
        self.tilts_for(n_qubits).map(|_| ())
    }
}

/// Classical Fisher information of the outcome distribution at one phase.
///
/// `divergent` is set when some outcome has (numerically) zero probability but
/// a non-vanishing phase derivative, in which case the finite part of the sum
/// is reported and the value is a lower estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo {
    pub value: f64,
    pub divergent: bool,
}

/// Probe + generator + measurement, with noise folded into an effective probe.
///
/// Because the per-qubit misalignment offsets commute with the collective
/// rotation, the noisy evolution `exp(-i sum_k (n_k.sigma)(theta + tau_k)/2)`
/// factorizes into the ideal `U(theta)` applied to a fixed rotated probe; the
/// model therefore precomputes one effective probe and evaluates every phase
/// against it.
#[derive(Debug, Clone)]
pub struct ProbabilityModel {
    probe: DensityMatrix,
    generator: CollectiveGenerator,
    measurement: MeasurementModel,
    noise: NoiseModel,
    effective_probe: DensityMatrix,
}

impl ProbabilityModel {
    /// Noise-free model. Requires matching dimensions and an even qubit count.
    pub fn new(probe: DensityMatrix, generator: CollectiveGenerator) -> Result<Self> {
        if probe.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: generator.dim(),
                actual: probe.dim(),
            });
        }
        let measurement = MeasurementModel::projectors(probe.n_qubits())?;
        let effective_probe = probe.clone();
        Ok(ProbabilityModel {
            probe,
            generator,
            measurement,
            noise: NoiseModel::none(),
            effective_probe,
        })
    }

    /// Returns a copy of this model with `noise` applied to the ideal probe,
    /// replacing any noise attached earlier.
    pub fn with_noise(&self, noise: NoiseModel) -> Result<Self> {
        let n = self.probe.n_qubits();
        noise.validate(n)?;
        let dim = self.probe.dim();

        // Visibility damps off-diagonal entries of the source state.
        let v = noise.visibility;
        let mut matrix = self.probe.matrix().clone();
        for r in 0..dim {
            for c in 0..dim {
                if r != c {
                    matrix[(r, c)] = matrix[(r, c)].scale(v);
                }
            }
        }

        // Misalignment: fixed rotation exp(-i sum_k (n_k.sigma) tau_k / 2).
        let tilts = noise.tilts_for(n)?;
        if tilts.iter().any(|&t| t != 0.0) {
            let mut rotation: DMatrix<Complex64> = DMatrix::identity(dim, dim);
            for (qubit, (&tilt, axis)) in tilts.iter().zip(self.generator.axes()).enumerate() {
                let half = tilt / 2.0;
                let local = nalgebra::Matrix2::identity().map(|e: Complex64| e.scale(half.cos()))
                    - axis.pauli_matrix().map(|e| e * Complex64::new(0.0, half.sin()));
                rotation = rotation * embed_single_qubit(&local, qubit, n);
            }
            matrix = &rotation * matrix * rotation.adjoint();
        }

        // White noise mixes toward the maximally mixed state.
        let p = noise.white_noise;
        if p != 0.0 {
            let uniform = p / dim as f64;
            matrix.scale_mut(1.0 - p);
            for d in 0..dim {
                matrix[(d, d)] += Complex64::new(uniform, 0.0);
            }
        }

        let effective_probe = DensityMatrix::from_matrix(n, matrix)?;
        Ok(ProbabilityModel {
            probe: self.probe.clone(),
            generator: self.generator.clone(),
            measurement: self.measurement.clone(),
            noise,
            effective_probe,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.probe.n_qubits()
    }

    pub fn probe(&self) -> &DensityMatrix {
        &self.probe
    }

    pub fn generator(&self) -> &CollectiveGenerator {
        &self.generator
    }

    pub fn measurement(&self) -> &MeasurementModel {
        &self.measurement
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// The probe after visibility damping, misalignment, and white noise.
    pub fn effective_probe(&self) -> &DensityMatrix {
        &self.effective_probe
    }

    /// `P(mu | theta)` for every outcome, in the order of
    /// [`MeasurementModel::outcomes`]. Values are clamped to `[0, 1]` after a
    /// `-1e-12` sanity margin.
    pub fn outcome_probabilities(&self, theta: f64) -> Result<Vec<f64>> {
        let rotated = evolve(&self.effective_probe, &self.generator, theta)?;
        let m = rotated.matrix();
        let probs = self
            .measurement
            .sectors
            .iter()
            .map(|sector| {
                let p: f64 = sector.iter().map(|&b| m[(b, b)].re).sum();
                debug_assert!(p > -PROB_EPS, "probability {p} below tolerance");
                p.clamp(0.0, 1.0)
            })
            .collect();
        Ok(probs)
    }

    pub fn cond_prob(&self, theta: f64, mu: i32) -> Result<f64> {
        let index = self
            .measurement
            .index_of(mu)
            .ok_or_else(|| Error::Parameter(format!("outcome {mu} out of range")))?;
        Ok(self.outcome_probabilities(theta)?[index])
    }

    /// Analytic `dP(mu | theta)/dtheta` for every outcome, from
    /// `d rho_theta / d theta = -i [J, rho_theta]`.
    pub fn outcome_derivatives(&self, theta: f64) -> Result<Vec<f64>> {
        let rotated = evolve(&self.effective_probe, &self.generator, theta)?;
        let j = self.generator.matrix();
        let commutator = j * rotated.matrix() - rotated.matrix() * j;
        Ok(self
            .measurement
            .sectors
            .iter()
            .map(|sector| {
                sector
                    .iter()
                    .map(|&b| (Complex64::new(0.0, -1.0) * commutator[(b, b)]).re)
                    .sum()
            })
            .collect())
    }

    pub fn prob_derivative(&self, theta: f64, mu: i32) -> Result<f64> {
        let index = self
            .measurement
            .index_of(mu)
            .ok_or_else(|| Error::Parameter(format!("outcome {mu} out of range")))?;
        Ok(self.outcome_derivatives(theta)?[index])
    }

    /// Classical Fisher information `F(theta) = sum_mu (dP/dtheta)^2 / P`.
    ///
    /// Outcomes with `P < 1e-12` are dropped when their derivative also
    /// vanishes (`|dP| < 1e-9`); otherwise the result is flagged divergent.
    pub fn fisher_information(&self, theta: f64) -> Result<FisherInfo> {
        let probs = self.outcome_probabilities(theta)?;
        let derivs = self.outcome_derivatives(theta)?;
        let mut value = 0.0;
        let mut divergent = false;
        for (p, dp) in probs.iter().zip(&derivs) {
            if *p >= PROB_EPS {
                value += dp * dp / p;
            } else if dp.abs() >= DERIV_EPS {
                divergent = true;
            }
        }
        Ok(FisherInfo { value, divergent })
    }
}

/// Free-function form of [`ProbabilityModel::with_noise`].
pub fn apply_noise(model: &ProbabilityModel, noise: &NoiseModel) -> Result<ProbabilityModel> {
    model.with_noise(noise.clone())
}
