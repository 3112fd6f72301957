//! Dense symmetric eigensolving via cyclic Jacobi sweeps, plus the singular
//! value helpers built on it. Sized for the moderate matrices this crate
//! produces (a few hundred rows at most); the quadratic convergence of
//! Jacobi makes the sweep count tiny at the tolerances we need.

use nalgebra::DMatrix;

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching eigenvectors as columns.
#[derive(Clone, Debug)]
pub(crate) struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Frobenius norm of the strict off-diagonal part.
fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigensolver. Sweeps rotate away every off-diagonal entry in
/// turn until the remaining off-diagonal mass drops below `tol_rel` times
/// the Frobenius norm of the input (with a floor for the zero matrix).
pub(crate) fn jacobi_sym_eig(a: &DMatrix<f64>, tol_rel: f64) -> SymEig {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let tol = tol_rel * scale;

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        if off_diagonal_norm(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                // Classic two-sided rotation choosing the smaller angle.
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    SymEig { values, vectors }
}

/// Eigenvalues only, ascending.
pub(crate) fn sym_eigenvalues(a: &DMatrix<f64>, tol_rel: f64) -> Vec<f64> {
    jacobi_sym_eig(a, tol_rel).values
}

/// Singular values of a general rectangular matrix, ascending, via the
/// eigenvalues of A^T A (adequate at our sizes; tiny singular values are
/// reported at sqrt(eigenvalue) resolution, which the callers' tolerances
/// account for).
pub(crate) fn singular_values(a: &DMatrix<f64>, tol_rel: f64) -> Vec<f64> {
    let gram = a.transpose() * a;
    sym_eigenvalues(&gram, tol_rel)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Largest singular value (spectral norm).
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a, 1e-14).last().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {a} and {b} within {tol}, differ by {:e}",
            (a - b).abs()
        );
    }

    #[test]
    fn diagonal_matrix_is_fixed_point() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let eig = jacobi_sym_eig(&a, 1e-12);
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = jacobi_sym_eig(&a, 1e-14);
        assert_close(eig.values[0], 1.0, 1e-12);
        assert_close(eig.values[1], 3.0, 1e-12);
    }

    #[test]
    fn reconstructs_random_symmetric_matrices() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for n in [1usize, 2, 5, 12, 33] {
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let eig = jacobi_sym_eig(&a, 1e-14);
            // Residual per eigenpair and orthonormality of the basis.
            for k in 0..n {
                let v = eig.vectors.column(k);
                let res = (&a * v) - eig.values[k] * v;
                assert!(res.norm() <= 1e-10 * a.norm().max(1.0));
            }
            let gram = eig.vectors.transpose() * &eig.vectors;
            assert!((gram - DMatrix::identity(n, n)).norm() <= 1e-10);
            // Ascending order.
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1] + 1e-14);
            }
        }
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, 2) stacked over a zero row: singular values {2, 3}.
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let sv = singular_values(&a, 1e-14);
        assert_close(sv[0], 2.0, 1e-12);
        assert_close(sv[1], 3.0, 1e-12);
        assert_close(spectral_norm(&a), 3.0, 1e-12);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        let a = DMatrix::from_fn(4, 3, |i, j| ((i + 1) * (j + 1)) as f64);
        // Rank one: norm = |u| |v| with u = (1,2,3,4), v = (1,2,3).
        let expect = (30.0f64).sqrt() * (14.0f64).sqrt();
        assert_close(spectral_norm(&a), expect, 1e-10);
    }
}
