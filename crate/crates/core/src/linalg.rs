//! Dense Hermitian eigendecomposition by the cyclic complex Jacobi method.
//!
//! The matrices in this crate are small (dimension `2^N` for a handful of
//! qubits) but routinely carry highly degenerate spectra: a collective
//! generator is a sum of commuting single-qubit terms, and pure-state density
//! matrices are rank one. General-purpose tridiagonalization-based solvers
//! were observed to return eigenvector bases that fail to reconstruct such
//! inputs, so the crate carries its own Jacobi implementation: each rotation
//! is exactly unitary, which keeps the accumulated basis orthonormal and the
//! reconstruction error at the rounding level regardless of degeneracy.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const MAX_SWEEPS: usize = 50;

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvector columns. Only the Hermitian part of the input is used, so
/// floating-point drift in the far triangle cannot perturb the result.
pub fn hermitian_eigen(matrix: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let dim = matrix.nrows();
    assert_eq!(dim, matrix.ncols(), "matrix must be square");
    let mut h = (matrix + matrix.adjoint()).scale(0.5);
    let mut vectors: DMatrix<Complex64> = DMatrix::identity(dim, dim);

    let scale = h.norm().max(1.0);
    let target = 1e-15 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += h[(p, q)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                rotate(&mut h, &mut vectors, p, q);
            }
        }
    }

    let values = DVector::from_iterator(dim, (0..dim).map(|i| h[(i, i)].re));
    sort_ascending(values, vectors)
}

/// One Jacobi rotation zeroing `h[(p, q)]` while preserving Hermiticity.
fn rotate(h: &mut DMatrix<Complex64>, vectors: &mut DMatrix<Complex64>, p: usize, q: usize) {
    let hpq = h[(p, q)];
    let r = hpq.norm();
    if r == 0.0 {
        return;
    }
    let phase = hpq / r;
    let a = h[(p, p)].re;
    let b = h[(q, q)].re;

    // cot(2 theta) = (a - b) / (2 r); pick |theta| <= pi/4 for stability.
    let cot2 = (a - b) / (2.0 * r);
    let t = if cot2 >= 0.0 {
        1.0 / (cot2 + (1.0 + cot2 * cot2).sqrt())
    } else {
        -1.0 / (-cot2 + (1.0 + cot2 * cot2).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Column update: col_p' = c col_p + s conj(phase) col_q,
    //                col_q' = -s phase col_p + c col_q.
    let sp = phase.conj().scale(s);
    let sm = phase.scale(s);
    let dim = h.nrows();
    for i in 0..dim {
        let hip = h[(i, p)];
        let hiq = h[(i, q)];
        h[(i, p)] = hip.scale(c) + hiq * sp;
        h[(i, q)] = hiq.scale(c) - hip * sm;
    }
    for i in 0..dim {
        h[(p, i)] = h[(i, p)].conj();
        h[(q, i)] = h[(i, q)].conj();
    }
    let new_pp = c * c * a + 2.0 * c * s * r + s * s * b;
    let new_qq = s * s * a - 2.0 * c * s * r + c * c * b;
    h[(p, p)] = Complex64::new(new_pp, 0.0);
    h[(q, q)] = Complex64::new(new_qq, 0.0);
    h[(p, q)] = Complex64::new(0.0, 0.0);
    h[(q, p)] = Complex64::new(0.0, 0.0);

    for i in 0..vectors.nrows() {
        let vip = vectors[(i, p)];
        let viq = vectors[(i, q)];
        vectors[(i, p)] = vip.scale(c) + viq * sp;
        vectors[(i, q)] = viq.scale(c) - vip * sm;
    }
}

fn sort_ascending(
    values: DVector<f64>,
    vectors: DMatrix<Complex64>,
) -> (DVector<f64>, DMatrix<Complex64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = DVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let mut sorted_vectors =
        DMatrix::from_element(vectors.nrows(), vectors.ncols(), Complex64::new(0.0, 0.0));
    for (col, &i) in order.iter().enumerate() {
        sorted_vectors.set_column(col, &vectors.column(i));
    }
    (sorted_values, sorted_vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<Complex64> {
        let raw = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        (&raw + raw.adjoint()).scale(0.5)
    }

    fn check(h: &DMatrix<Complex64>, tol: f64) {
        let dim = h.nrows();
        let (values, vectors) = hermitian_eigen(h);
        let gram = vectors.adjoint() * &vectors;
        assert!((gram - DMatrix::<Complex64>::identity(dim, dim)).norm() < tol);
        let diag = DMatrix::from_diagonal(&values.map(|v| Complex64::new(v, 0.0)));
        let rebuilt = &vectors * diag * vectors.adjoint();
        let recon_err = (rebuilt - h).norm();
        assert!(recon_err < tol, "reconstruction error {recon_err:e}");
        for w in values.as_slice().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn random_dense_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 2, 3, 5, 8, 16] {
            for _ in 0..20 {
                check(&random_hermitian(&mut rng, dim), 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_spectra_reconstruct_exactly() {
        // Conjugate a spectrum with repeated eigenvalues by a random unitary
        // (obtained from the eigenvectors of another Hermitian matrix).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (_, u) = hermitian_eigen(&random_hermitian(&mut rng, 8));
            let spectrum = [0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 2.0];
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(
                8,
                spectrum.iter().map(|&v| Complex64::new(v, 0.0)),
            ));
            let h = &u * diag * u.adjoint();
            check(&h, 1e-12);
            let (values, _) = hermitian_eigen(&h);
            for (got, want) in values.iter().zip(spectrum) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 16;
        let raw: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let v = DVector::from_vec(raw).scale(1.0 / norm);
        let h = &v * v.adjoint();
        check(&h, 1e-12);
        let (values, _) = hermitian_eigen(&h);
        assert!((values[dim - 1] - 1.0).abs() < 1e-12);
        assert!(values.iter().take(dim - 1).all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn diagonal_input_is_fixed_point() {
        let h = DMatrix::from_diagonal(&DVector::from_iterator(
            4,
            [3.0, -1.0, 2.0, -1.0].iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        check(&h, 1e-14);
    }
}
