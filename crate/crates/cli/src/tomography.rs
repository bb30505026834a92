//! Loading and saving tomographic density matrices.
//!
//! The on-disk format is JSON with three fields: `dim`, and `dim x dim`
//! arrays `re` and `im` holding the real and imaginary parts. Experimental
//! reconstructions carry small numerical defects, so loading applies a
//! bounded repair ladder; anything beyond the documented tolerances is
//! rejected outright, and a rejected file contributes no state at all.
//!
//! Repairs, in order:
//!
//! 1. Hermiticity: deviations up to [`HERMITICITY_TOL`] are symmetrized
//!    away; larger ones are errors.
//! 2. Trace: deviations from one up to [`TRACE_TOL`] are renormalized;
//!    larger ones are errors.
//! 3. Positivity: eigenvalues down to [`EIGENVALUE_FLOOR`] are clipped to
//!    zero (with a warning recorded and the trace restored); anything lower
//!    is an error.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qmetro::linalg::hermitian_eigen;
use qmetro::DensityMatrix;

/// Largest tolerated entrywise deviation from Hermitian symmetry.
pub const HERMITICITY_TOL: f64 = 1e-8;
/// Largest tolerated deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-6;
/// Most negative eigenvalue that is still treated as rounding noise.
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

/// Repairs below this size happen silently; larger ones record a warning.
const WARN_THRESHOLD: f64 = 1e-12;

/// Serialized form of a density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographyFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TomographyFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let dim = rho.dim();
        let m = rho.matrix();
        let re = (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].im).collect()).collect();
        TomographyFile { dim, re, im }
    }
}

/// Loads a density matrix, applying the repair ladder described in the
/// module documentation. Returns the state together with the warnings
/// recorded for repairs that changed the matrix noticeably.
pub fn load_density_matrix(path: &Path) -> Result<(DensityMatrix, Vec<String>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read state file {}", path.display()))?;
    let file: TomographyFile = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse state file {}", path.display()))?;
    let (rho, warnings) =
        density_from_parts(file.dim, &file.re, &file.im).with_context(|| {
            format!("state file {} failed validation", path.display())
        })?;
    Ok((rho, warnings))
}

/// Validates and repairs a raw matrix given as real and imaginary parts.
pub fn density_from_parts(
    dim: usize,
    re: &[Vec<f64>],
    im: &[Vec<f64>],
) -> Result<(DensityMatrix, Vec<String>)> {
    let n_qubits = match dim {
        d if d >= 2 && d.is_power_of_two() => d.trailing_zeros() as usize,
        _ => bail!("dimension {dim} is not a power of two of at least one qubit"),
    };
    if re.len() != dim || im.len() != dim {
        bail!("matrix has {} real and {} imaginary rows, expected {dim}", re.len(), im.len());
    }
    for (i, (row_re, row_im)) in re.iter().zip(im).enumerate() {
        if row_re.len() != dim || row_im.len() != dim {
            bail!(
                "row {i} has {} real and {} imaginary entries, expected {dim}",
                row_re.len(),
                row_im.len()
            );
        }
    }
    let mut matrix = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(re[i][j], im[i][j]));
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        bail!("matrix contains non-finite entries");
    }
    let mut warnings = Vec::new();

    // Hermiticity: measure the worst entrywise asymmetry, then keep only the
    // Hermitian part.
    let mut herm_dev = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            herm_dev = herm_dev.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    if herm_dev > HERMITICITY_TOL {
        bail!("hermiticity deviation {herm_dev:.3e} exceeds the {HERMITICITY_TOL:e} tolerance");
    }
    if herm_dev > 0.0 {
        let adjoint = matrix.adjoint();
        matrix = (&matrix + &adjoint).scale(0.5);
        if herm_dev > WARN_THRESHOLD {
            warnings.push(format!("symmetrized hermiticity deviation {herm_dev:.3e}"));
        }
    }

    // Trace: renormalize small drift.
    let trace: f64 = (0..dim).map(|i| matrix[(i, i)].re).sum();
    let trace_dev = (trace - 1.0).abs();
    if trace_dev > TRACE_TOL {
        bail!("trace deviation {trace_dev:.3e} exceeds the {TRACE_TOL:e} tolerance");
    }
    if trace_dev > 0.0 {
        matrix.scale_mut(1.0 / trace);
        if trace_dev > WARN_THRESHOLD {
            warnings.push(format!("renormalized trace deviation {trace_dev:.3e}"));
        }
    }

    // Positivity: clip rounding-level negative eigenvalues, reject real ones.
    let (eigenvalues, vectors) = hermitian_eigen(&matrix);
    let min_eig = eigenvalues.min();
    if min_eig < EIGENVALUE_FLOOR {
        bail!(
            "negative eigenvalue {min_eig:.3e} lies below the {EIGENVALUE_FLOOR:e} floor"
        );
    }
    if min_eig < 0.0 {
        let clipped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let mut rebuilt = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (k, &l) in clipped.iter().enumerate() {
            if l > 0.0 {
                let v = vectors.column(k);
                let scale = Complex64::new(l / total, 0.0);
                rebuilt += (&v * v.adjoint()).map(|z| z * scale);
            }
        }
        matrix = rebuilt;
        if min_eig < -WARN_THRESHOLD {
            warnings.push(format!(
                "clipped negative eigenvalues (most negative {min_eig:.3e})"
            ));
        }
    }

    let rho = DensityMatrix::from_matrix(n_qubits, matrix)
        .context("repaired matrix was still rejected as a density matrix")?;
    Ok((rho, warnings))
}

/// Writes a density matrix in the tomography JSON format.
pub fn save_density_matrix(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let file = TomographyFile::from_density(rho);
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)
        .with_context(|| format!("cannot write state file {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qmetro::{fidelity, PureState};

    fn dicke_parts() -> (usize, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let rho = PureState::dicke(4, 2).unwrap().density();
        let file = TomographyFile::from_density(&rho);
        (file.dim, file.re, file.im)
    }

    #[test]
    fn round_trip_preserves_the_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dicke.json");
        let psi = PureState::dicke(4, 2).unwrap();
        save_density_matrix(&path, &psi.density()).unwrap();
        let (rho, warnings) = load_density_matrix(&path).unwrap();
        assert!(warnings.is_empty(), "exact file should load silently: {warnings:?}");
        let f = fidelity(&rho, &psi).unwrap();
        assert!((f - 1.0).abs() < 1e-10, "round-trip fidelity {f}");
    }

    #[test]
    fn small_hermiticity_drift_is_symmetrized_with_a_warning() {
        let (dim, mut re, im) = dicke_parts();
        re[0][1] += 3e-9;
        let (rho, warnings) = density_from_parts(dim, &re, &im).unwrap();
        // Symmetrizing adds weight outside the original support, so a
        // rounding-level negative eigenvalue (and its clip warning) can
        // legitimately follow the hermiticity warning.
        assert!(warnings.iter().any(|w| w.contains("hermiticity")), "{warnings:?}");
        let m = rho.matrix();
        let dev = (m[(0, 1)] - m[(1, 0)].conj()).norm();
        assert!(dev < 1e-15, "asymmetry survives: {dev}");
    }

    #[test]
    fn large_hermiticity_drift_is_rejected_by_name_and_size() {
        let (dim, mut re, im) = dicke_parts();
        re[0][1] += 1e-6;
        let err = density_from_parts(dim, &re, &im).unwrap_err();
        let text = format!("{err:#}");
        assert!(text.contains("hermiticity deviation"), "{text}");
        assert!(text.contains("1.000e-6"), "magnitude missing: {text}");
    }

    #[test]
    fn small_trace_drift_is_renormalized() {
        let (dim, mut re, im) = dicke_parts();
        for i in 0..dim {
            for j in 0..dim {
                re[i][j] *= 1.0 + 5e-7;
            }
        }
        let (rho, warnings) = density_from_parts(dim, &re, &im).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(warnings.iter().any(|w| w.contains("trace")), "{warnings:?}");
    }

    #[test]
    fn large_trace_drift_is_rejected_by_name_and_size() {
        let (dim, mut re, im) = dicke_parts();
        for i in 0..dim {
            re[i][i] *= 1.1;
        }
        let err = density_from_parts(dim, &re, &im).unwrap_err();
        let text = format!("{err:#}");
        assert!(text.contains("trace deviation"), "{text}");
    }

    #[test]
    fn rounding_level_negative_eigenvalues_are_clipped() {
        // Mix a pure state with a tiny negative multiple of a basis
        // projector: one eigenvalue goes slightly negative.
        let (dim, mut re, im) = dicke_parts();
        let eps = 4e-9;
        for i in 0..dim {
            re[i][i] *= 1.0 + eps;
        }
        re[0][0] -= eps;
        let (rho, warnings) = density_from_parts(dim, &re, &im).unwrap();
        assert!(warnings.iter().any(|w| w.contains("clipped")), "{warnings:?}");
        let (eigenvalues, _) = rho.eigen();
        assert!(eigenvalues.min() >= -1e-14, "still negative: {}", eigenvalues.min());
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn genuinely_negative_matrices_are_rejected() {
        let (dim, mut re, im) = dicke_parts();
        // Push well below the floor while keeping the trace intact.
        re[0][0] -= 1e-4;
        re[1][1] += 1e-4;
        let err = density_from_parts(dim, &re, &im).unwrap_err();
        let text = format!("{err:#}");
        assert!(text.contains("negative eigenvalue"), "{text}");
    }

    #[test]
    fn malformed_shapes_and_dims_are_rejected() {
        let (dim, re, im) = dicke_parts();
        assert!(density_from_parts(15, &re, &im).is_err(), "non power of two");
        assert!(density_from_parts(dim, &re[..8].to_vec(), &im).is_err(), "missing rows");
        let mut ragged = re.clone();
        ragged[3].pop();
        assert!(density_from_parts(dim, &ragged, &im).is_err(), "ragged row");
        let mut inf = re;
        inf[2][2] = f64::INFINITY;
        assert!(density_from_parts(dim, &inf, &im).is_err(), "non-finite entry");
    }

    #[test]
    fn maximally_mixed_state_loads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.json");
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        save_density_matrix(&path, &rho).unwrap();
        let (loaded, warnings) = load_density_matrix(&path).unwrap();
        assert!(warnings.is_empty());
        assert!((loaded.purity() - 1.0 / 16.0).abs() < 1e-12);
    }
}
