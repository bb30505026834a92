//! Pure states, density matrices, and collective rotation generators for
//! registers of N polarization qubits.
//!
//! Index convention: `H -> 0`, `V -> 1`, and mode 1 is the most significant
//! bit, so on four qubits `|HHVV>` is basis index `0b0011 = 3`.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;

/// Tolerance for unit-norm checks on state vectors and axes.
pub const NORM_TOL: f64 = 1e-12;
/// Entrywise tolerance for Hermiticity of density matrices built in code.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance for `Tr rho = 1`.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as "zero" for positivity checks.
pub const EIGENVALUE_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::Parameter("qubit count must be at least 1".into()));
    }
    if n_qubits > 24 {
        return Err(Error::Parameter(format!(
            "qubit count {n_qubits} exceeds the dense-simulation limit"
        )));
    }
    Ok(())
}

/// Unit vector on the Bloch sphere selecting one qubit's rotation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAxis {
    x: f64,
    y: f64,
    z: f64,
}

impl LocalAxis {
    pub const X: LocalAxis = LocalAxis { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: LocalAxis = LocalAxis { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: LocalAxis = LocalAxis { x: 0.0, y: 0.0, z: 1.0 };

    /// Builds an axis from Cartesian components, requiring unit norm within
    /// [`NORM_TOL`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm_sqr = x * x + y * y + z * z;
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!(
                "axis ({x}, {y}, {z}) is not unit length (|n|^2 = {norm_sqr})"
            )));
        }
        Ok(LocalAxis { x, y, z })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::Parameter(
                "cannot normalize a near-zero axis vector".into(),
            ));
        }
        Ok(LocalAxis { x: x / norm, y: y / norm, z: z / norm })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// The 2x2 operator `n . sigma` for this axis.
    pub fn pauli_matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(self.z, 0.0),
            Complex64::new(self.x, -self.y),
            Complex64::new(self.x, self.y),
            Complex64::new(-self.z, 0.0),
        )
    }
}

/// Normalized state vector on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Symmetric state with exactly `excitations` qubits in `V`, uniform over
    /// all basis strings of that weight.
    pub fn dicke(n_qubits: usize, excitations: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if excitations > n_qubits {
            return Err(Error::Parameter(format!(
                "excitation number {excitations} exceeds qubit count {n_qubits}"
            )));
        }
        let dim = 1usize << n_qubits;
        let count = binomial(n_qubits, excitations);
        let amp = Complex64::new(1.0 / (count as f64).sqrt(), 0.0);
        let mut amplitudes = DVector::from_element(dim, ZERO);
        for basis in 0..dim {
            if basis.count_ones() as usize == excitations {
                amplitudes[basis] = amp;
            }
        }
        Ok(PureState { n_qubits, amplitudes })
    }

    /// `(|0...0> + |1...1>)/sqrt(2)`.
    pub fn ghz(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut amplitudes = DVector::from_element(dim, ZERO);
        amplitudes[0] = amp;
        amplitudes[dim - 1] = amp;
        Ok(PureState { n_qubits, amplitudes })
    }

    /// Tensor power of a normalized single-qubit ket `(a, b)`.
    pub fn product(n_qubits: usize, single: [Complex64; 2]) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let norm_sqr = single[0].norm_sqr() + single[1].norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!(
                "single-qubit ket is not normalized (|a|^2 + |b|^2 = {norm_sqr})"
            )));
        }
        let dim = 1usize << n_qubits;
        let mut amplitudes = DVector::from_element(dim, ZERO);
        for basis in 0..dim {
            let mut amp = Complex64::new(1.0, 0.0);
            for qubit in 0..n_qubits {
                let bit = (basis >> (n_qubits - 1 - qubit)) & 1;
                amp *= single[bit];
            }
            amplitudes[basis] = amp;
        }
        Ok(PureState { n_qubits, amplitudes })
    }

    /// `|+>^(x)N` with `|+> = (|H> + |V>)/sqrt(2)`.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::product(n_qubits, [amp, amp])
    }

    /// Builds a state from raw amplitudes, validating length and norm.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: amplitudes.len() });
        }
        let amplitudes = DVector::from_vec(amplitudes);
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::Parameter(format!(
                "state vector norm deviates from 1 by {:e}",
                (norm_sqr - 1.0).abs()
            )));
        }
        Ok(PureState { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, basis: usize) -> Complex64 {
        self.amplitudes[basis]
    }

    /// The projector `|psi><psi|` as a density matrix.
    pub fn density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { n_qubits: self.n_qubits, matrix: m }
    }
}

/// Trace-one positive semidefinite Hermitian operator on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity before accepting the
    /// matrix. Rejects anything outside the module tolerances.
    pub fn from_matrix(n_qubits: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows().max(matrix.ncols()),
            });
        }
        let mut herm_dev: f64 = 0.0;
        for r in 0..dim {
            for c in 0..=r {
                herm_dev = herm_dev.max((matrix[(r, c)] - matrix[(c, r)].conj()).norm());
            }
        }
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::Parameter(format!(
                "matrix is not Hermitian (max deviation {herm_dev:e})"
            )));
        }
        let trace: Complex64 = matrix.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::Parameter(format!(
                "trace deviates from 1 by {:e}",
                ((trace.re - 1.0).powi(2) + trace.im.powi(2)).sqrt()
            )));
        }
        let state = DensityMatrix { n_qubits, matrix };
        let (eigenvalues, _) = state.eigen();
        let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -EIGENVALUE_TOL {
            return Err(Error::Parameter(format!(
                "matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_matrix_unchecked(n_qubits: usize, matrix: DMatrix<Complex64>) -> Self {
        DensityMatrix { n_qubits, matrix }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        psi.density()
    }

    /// `I / 2^N`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let matrix = DMatrix::from_diagonal_element(
            dim,
            dim,
            Complex64::new(1.0 / dim as f64, 0.0),
        );
        Ok(DensityMatrix { n_qubits, matrix })
    }

    /// Convex combination of states with nonnegative weights summing to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::Parameter("mixture requires at least one component".into()));
        };
        let n_qubits = first.n_qubits;
        let dim = first.dim();
        let mut total = 0.0;
        let mut matrix = DMatrix::from_element(dim, dim, ZERO);
        for (w, part) in parts {
            if *w < -1e-15 {
                return Err(Error::Parameter(format!("negative mixture weight {w}")));
            }
            if part.n_qubits != n_qubits {
                return Err(Error::DimensionMismatch { expected: dim, actual: part.dim() });
            }
            matrix += part.matrix.scale(*w);
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(DensityMatrix { n_qubits, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|d| d.re).sum()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).diagonal().iter().map(|d| d.re).sum()
    }

    /// Eigendecomposition with real eigenvalues in ascending order and
    /// orthonormal eigenvector columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<Complex64>) {
        hermitian_eigen(&self.matrix)
    }
}

/// Overlap `<psi| rho |psi>`.
pub fn fidelity(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: psi.dim() });
    }
    let v = psi.amplitudes();
    let overlap = (v.adjoint() * rho.matrix() * v)[(0, 0)];
    Ok(overlap.re)
}

/// Hermitian generator `J = 1/2 sum_i n_i . sigma^(i)` of a collective phase
/// rotation, with one rotation axis per qubit. The spectral decomposition is
/// cached at construction so repeated evolutions reuse it.
#[derive(Debug, Clone)]
pub struct CollectiveGenerator {
    n_qubits: usize,
    axes: Vec<LocalAxis>,
    matrix: DMatrix<Complex64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl CollectiveGenerator {
    pub fn new(axes: &[LocalAxis]) -> Result<Self> {
        let n_qubits = axes.len();
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut matrix = DMatrix::from_element(dim, dim, ZERO);
        for (qubit, axis) in axes.iter().enumerate() {
            matrix += embed_single_qubit(&axis.pauli_matrix(), qubit, n_qubits).scale(0.5);
        }
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
        Ok(CollectiveGenerator { n_qubits, axes: axes.to_vec(), matrix, eigenvalues, eigenvectors })
    }

    /// Same axis on every qubit.
    pub fn uniform(n_qubits: usize, axis: LocalAxis) -> Result<Self> {
        Self::new(&vec![axis; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn axes(&self) -> &[LocalAxis] {
        &self.axes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigen(&self) -> (&DVector<f64>, &DMatrix<Complex64>) {
        (&self.eigenvalues, &self.eigenvectors)
    }

    /// `U(theta) = exp(-i J theta)` from the cached spectral decomposition.
    pub fn rotation(&self, theta: f64) -> DMatrix<Complex64> {
        let phases = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|e| Complex64::from_polar(1.0, -e * theta)),
        );
        let mut scaled = self.eigenvectors.clone();
        for (col, phase) in phases.iter().enumerate() {
            scaled.column_mut(col).scale_mut(1.0);
            for r in 0..scaled.nrows() {
                scaled[(r, col)] *= phase;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Places a 2x2 operator on one qubit (0-indexed, mode order) and identity on
/// the rest.
pub(crate) fn embed_single_qubit(
    op: &Matrix2<Complex64>,
    qubit: usize,
    n_qubits: usize,
) -> DMatrix<Complex64> {
    let dim = 1usize << n_qubits;
    let shift = n_qubits - 1 - qubit;
    let mut full = DMatrix::from_element(dim, dim, ZERO);
    for row in 0..dim {
        let row_bit = (row >> shift) & 1;
        let rest = row & !(1usize << shift);
        for col_bit in 0..2 {
            let col = rest | (col_bit << shift);
            let entry = op[(row_bit, col_bit)];
            if entry != ZERO {
                full[(row, col)] = entry;
            }
        }
    }
    full
}

/// Conjugates `rho` by `U(theta) = exp(-i J theta)`.
pub fn evolve(rho: &DensityMatrix, generator: &CollectiveGenerator, theta: f64) -> Result<DensityMatrix> {
    if rho.dim() != generator.dim() {
        return Err(Error::DimensionMismatch { expected: generator.dim(), actual: rho.dim() });
    }
    if !theta.is_finite() {
        return Err(Error::Parameter(format!("phase {theta} is not finite")));
    }
    let u = generator.rotation(theta);
    let rotated = &u * rho.matrix() * u.adjoint();
    Ok(DensityMatrix::from_matrix_unchecked(rho.n_qubits(), rotated))
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut result = 1u64;
    for i in 0..k {
        result = result * (n - i) as u64 / (i + 1) as u64;
    }
    result
}
