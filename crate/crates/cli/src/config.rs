//! Run configuration: which probe, generator, and noise to use, which phase
//! points and sample sizes to sweep, and where to put the report bundle.
//!
//! A configuration is plain JSON with every field optional; missing fields
//! take the defaults listed on [`ExperimentConfig`]. Angles in config files
//! are radians. Command-line flags additionally accept the `0.2pi` shorthand
//! via [`parse_theta`].

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qmetro::{
    CollectiveGenerator, DensityMatrix, LocalAxis, NoiseModel, ProbabilityModel, PureState,
};

use crate::tomography;

/// Probe state selector.
///
/// The string form used on the command line is `dicke:N:K`, `ghz:N`,
/// `plus:N`, `product:N:re,im,re,im`, or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    /// Symmetric `N`-qubit state with `K` excitations.
    Dicke { n: usize, k: usize },
    /// `(|0..0> + |1..1>)/sqrt(2)`.
    Ghz { n: usize },
    /// Product of `|+>` on every qubit.
    Plus { n: usize },
    /// Product of one arbitrary single-qubit ket, given as `(re, im)` pairs
    /// for the two amplitudes; the ket is normalized before use.
    Product { n: usize, amp_re: [f64; 2], amp_im: [f64; 2] },
    /// Density matrix loaded from a tomography JSON file.
    File { path: PathBuf },
}

impl StateSpec {
    /// Parses the colon-separated command-line form.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let usage = "expected dicke:N:K, ghz:N, plus:N, product:N:re,im,re,im, or file:PATH";
        match parts.as_slice() {
            ["dicke", n, k] => Ok(StateSpec::Dicke {
                n: parse_count(n)?,
                k: k.parse().with_context(|| format!("bad excitation count {k:?}"))?,
            }),
            ["ghz", n] => Ok(StateSpec::Ghz { n: parse_count(n)? }),
            ["plus", n] => Ok(StateSpec::Plus { n: parse_count(n)? }),
            ["product", n, amps] => {
                let values: Vec<f64> = amps
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad amplitude {v:?}")))
                    .collect::<Result<_>>()?;
                if values.len() != 4 {
                    bail!("product state needs 4 numbers (re,im,re,im), got {}", values.len());
                }
                Ok(StateSpec::Product {
                    n: parse_count(n)?,
                    amp_re: [values[0], values[2]],
                    amp_im: [values[1], values[3]],
                })
            }
            ["file", path] => Ok(StateSpec::File { path: PathBuf::from(path) }),
            _ => bail!("cannot parse state {text:?}: {usage}"),
        }
    }

    /// Builds the density matrix, returning any repair warnings issued while
    /// loading a tomography file (empty for exact constructions).
    pub fn build(&self) -> Result<(DensityMatrix, Vec<String>)> {
        let exact = |psi: qmetro::error::Result<PureState>| -> Result<(DensityMatrix, Vec<String>)> {
            Ok((psi?.density(), Vec::new()))
        };
        match self {
            StateSpec::Dicke { n, k } => exact(PureState::dicke(*n, *k)),
            StateSpec::Ghz { n } => exact(PureState::ghz(*n)),
            StateSpec::Plus { n } => exact(PureState::plus(*n)),
            StateSpec::Product { n, amp_re, amp_im } => {
                let a = num_complex::Complex64::new(amp_re[0], amp_im[0]);
                let b = num_complex::Complex64::new(amp_re[1], amp_im[1]);
                let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if !norm.is_finite() || norm < 1e-12 {
                    bail!("product-state amplitudes are numerically zero");
                }
                exact(PureState::product(*n, [a / norm, b / norm]))
            }
            StateSpec::File { path } => tomography::load_density_matrix(path),
        }
    }
}

fn parse_count(text: &str) -> Result<usize> {
    let n: usize = text.parse().with_context(|| format!("bad qubit count {text:?}"))?;
    if n == 0 {
        bail!("qubit count must be at least 1");
    }
    Ok(n)
}

/// Parses an angle, accepting plain radians (`0.6283`) or multiples of pi
/// (`0.2pi`, `0.5*pi`, `pi`, `-pi`).
pub fn parse_theta(text: &str) -> Result<f64> {
    let cleaned = text.trim().to_ascii_lowercase();
    let value = if let Some(prefix) = cleaned.strip_suffix("pi") {
        let prefix = prefix.trim_end_matches('*').trim();
        let factor = match prefix {
            "" => 1.0,
            "-" => -1.0,
            other => other
                .parse::<f64>()
                .with_context(|| format!("bad angle {text:?}"))?,
        };
        factor * PI
    } else {
        cleaned
            .parse::<f64>()
            .with_context(|| format!("bad angle {text:?}"))?
    };
    if !value.is_finite() {
        bail!("angle {text:?} is not finite");
    }
    Ok(value)
}

/// Parses generator axes: a single letter (`y`) applied to every qubit, or a
/// comma-separated letter per qubit (`y,x,z,y`).
pub fn parse_axes(text: &str, n_qubits: usize) -> Result<Vec<LocalAxis>> {
    let letter = |item: &str| -> Result<LocalAxis> {
        match item.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(LocalAxis::X),
            "y" => Ok(LocalAxis::Y),
            "z" => Ok(LocalAxis::Z),
            other => bail!("unknown axis {other:?}: expected x, y, or z"),
        }
    };
    let items: Vec<&str> = text.split(',').collect();
    if items.len() == 1 {
        return Ok(vec![letter(items[0])?; n_qubits]);
    }
    if items.len() != n_qubits {
        bail!("got {} axes for {} qubits", items.len(), n_qubits);
    }
    items.into_iter().map(letter).collect()
}

/// Noise parameters in configuration form.
///
/// Defaults describe a noiseless apparatus: no misalignment, zero white
/// noise, unit visibility. `misalignment` holds per-qubit rotation-axis
/// offsets in radians; a single entry is broadcast to every qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub misalignment: Vec<f64>,
    pub white_noise: f64,
    pub visibility: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { misalignment: Vec::new(), white_noise: 0.0, visibility: 1.0 }
    }
}

impl NoiseConfig {
    pub fn to_model(&self) -> NoiseModel {
        NoiseModel {
            misalignment: self.misalignment.clone(),
            white_noise: self.white_noise,
            visibility: self.visibility,
        }
    }

    pub fn from_model(model: &NoiseModel) -> Self {
        NoiseConfig {
            misalignment: model.misalignment.clone(),
            white_noise: model.white_noise,
            visibility: model.visibility,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.to_model().is_trivial()
    }
}

/// Complete description of one campaign run.
///
/// Field defaults:
///
/// | field | default |
/// |---|---|
/// | `state` | `dicke` with `n = 4`, `k = 2` |
/// | `axes` | `"y"` |
/// | `noise` | noiseless |
/// | `theta0_list` | `0.1pi, 0.15pi, 0.2pi, 0.25pi, 0.3pi` |
/// | `m_list` | `1, 10, 100` |
/// | `repetitions` | `200` |
/// | `base_seed` | `7` |
/// | `interval` | `[0, pi/2]` |
/// | `grid_points` | `2001` |
/// | `curve_points` | `201` |
/// | `restarts` | `16` |
/// | `output_dir` | `report` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Probe state.
    pub state: StateSpec,
    /// Generator axes in the letter grammar of [`parse_axes`].
    pub axes: String,
    /// Apparatus noise applied to the probe.
    pub noise: NoiseConfig,
    /// True phases (radians) at which campaigns run.
    pub theta0_list: Vec<f64>,
    /// Events per experiment for each campaign column.
    pub m_list: Vec<usize>,
    /// Experiments per campaign cell.
    pub repetitions: usize,
    /// Root of the deterministic seed schedule.
    pub base_seed: u64,
    /// Closed phase interval `[lo, hi]` for grids and estimation.
    pub interval: [f64; 2],
    /// Likelihood-grid resolution.
    pub grid_points: usize,
    /// Probability/Fisher curve resolution.
    pub curve_points: usize,
    /// Random restarts for the axis optimizer.
    pub restarts: usize,
    /// Report bundle directory.
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            state: StateSpec::Dicke { n: 4, k: 2 },
            axes: "y".into(),
            noise: NoiseConfig::default(),
            theta0_list: vec![0.10 * PI, 0.15 * PI, 0.20 * PI, 0.25 * PI, 0.30 * PI],
            m_list: vec![1, 10, 100],
            repetitions: 200,
            base_seed: 7,
            interval: [0.0, 0.5 * PI],
            grid_points: 2001,
            curve_points: 201,
            restarts: 16,
            output_dir: PathBuf::from("report"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Writes the configuration as pretty-printed JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("cannot write config {}", path.display()))?;
        Ok(())
    }

    /// Checks internal consistency without building any quantum objects.
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            bail!("interval [{lo}, {hi}] must be finite with lo < hi");
        }
        if self.grid_points < 3 {
            bail!("grid_points must be at least 3, got {}", self.grid_points);
        }
        if self.curve_points < 2 {
            bail!("curve_points must be at least 2, got {}", self.curve_points);
        }
        if self.repetitions < 2 {
            bail!("repetitions must be at least 2, got {}", self.repetitions);
        }
        if self.restarts < 1 {
            bail!("restarts must be at least 1, got {}", self.restarts);
        }
        if self.theta0_list.is_empty() {
            bail!("theta0_list must not be empty");
        }
        if self.m_list.is_empty() {
            bail!("m_list must not be empty");
        }
        for &theta0 in &self.theta0_list {
            if !(lo..=hi).contains(&theta0) {
                bail!("theta0 {theta0} lies outside the interval [{lo}, {hi}]");
            }
        }
        for &m in &self.m_list {
            if m == 0 {
                bail!("every m must be at least 1");
            }
        }
        Ok(())
    }

    /// Builds the full probability model (probe, generator, noise), returning
    /// tomography repair warnings alongside.
    pub fn build_model(&self) -> Result<(ProbabilityModel, Vec<String>)> {
        let (probe, warnings) = self.state.build()?;
        let axes = parse_axes(&self.axes, probe.n_qubits())?;
        let generator = CollectiveGenerator::new(&axes)?;
        let mut model = ProbabilityModel::new(probe, generator)?;
        let noise = self.noise.to_model();
        if !noise.is_trivial() {
            model = model.with_noise(noise)?;
        }
        Ok((model, warnings))
    }
}
