//! Cyclic Jacobi eigendecomposition for small symmetric matrices.

use crate::tol::Tolerances;

use super::mat::RealMatrix;
use super::LinalgError;

/// Full spectral decomposition of a symmetric matrix: eigenvalues ascending,
/// eigenvectors as orthonormal columns in matching order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: RealMatrix,
}

/// Max-row-sum norm of the off-diagonal part.
fn off_diagonal_norm(a: &RealMatrix) -> f64 {
    let n = a.rows();
    let mut best = 0.0f64;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                row += a[(i, j)].abs();
            }
        }
        best = best.max(row);
    }
    best
}

/// Diagonalizes a symmetric matrix with cyclic Jacobi rotations, sweeping
/// until the off-diagonal norm drops below `jacobi_off · ‖S‖`.
pub fn sym_eig(s: &RealMatrix, tol: &Tolerances) -> Result<SymEig, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    if n == 0 {
        return Ok(SymEig {
            eigenvalues: Vec::new(),
            eigenvectors: RealMatrix::zeros(0, 0),
        });
    }
    let norm = s.norm_inf();
    let asym = s.self_adjoint_defect();
    if asym > tol.symmetry * norm.max(1e-300) && asym > 0.0 {
        return Err(LinalgError::NotSymmetric { defect: asym });
    }

    let mut a = s.symmetrized();
    let mut v = RealMatrix::identity(n);
    let target = tol.jacobi_off * norm;

    let max_sweeps = 64;
    let mut sweeps = 0;
    while off_diagonal_norm(&a) > target && sweeps < max_sweeps {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Classic symmetric Schur 2x2: find c, s with
                // [c s; -s c]ᵀ [app apq; apq aqq] [c s; -s c] diagonal.
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if off_diagonal_norm(&a) > target {
        return Err(LinalgError::NoConvergence { iterations: sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = RealMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = v[(row, src)];
        }
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&RealMatrix::identity(2), &tol()).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_matrix_keeps_entries() {
        let m = RealMatrix::from_rows(&[vec![-11.0, 0.0], vec![0.0, -6.0]]);
        let e = sym_eig(&m, &tol()).unwrap();
        assert_eq!(e.eigenvalues, vec![-11.0, -6.0]);
    }

    #[test]
    fn swap_matrix_has_plus_minus_one() {
        // Characteristic polynomial λ² − 1 by hand.
        let m = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = sym_eig(&m, &tol()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        assert!(matches!(
            sym_eig(&m, &tol()),
            Err(LinalgError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn reconstruction_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let mut m = RealMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.gen_range(-5.0..5.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let e = sym_eig(&m, &tol()).unwrap();
            let mut d = RealMatrix::zeros(n, n);
            for i in 0..n {
                d[(i, i)] = e.eigenvalues[i];
            }
            let rebuilt = e.eigenvectors.mul(&d).mul(&e.eigenvectors.transpose());
            let norm = m.norm_inf().max(1e-30);
            assert!(rebuilt.sub(&m).norm_inf() <= 1e-9 * norm);
            let vtv = e.eigenvectors.transpose().mul(&e.eigenvectors);
            assert!(vtv.sub(&RealMatrix::identity(n)).norm_inf() <= 1e-10);
            // Residual bound per eigenpair.
            for k in 0..n {
                let mut col = RealMatrix::zeros(n, 1);
                for i in 0..n {
                    col[(i, 0)] = e.eigenvectors[(i, k)];
                }
                let resid = m.mul(&col).sub(&col.scale(e.eigenvalues[k]));
                assert!(resid.norm_inf() <= 1e-10 * norm.max(1.0));
            }
        }
    }
}
