//! Self-contained dense linear algebra for the small matrices this crate
//! works with: symmetric eigendecomposition (cyclic Jacobi), complex
//! eigenvalues (Hessenberg + shifted QR), LU solves, nullspaces, orthogonal
//! projectors, and SPD square roots.

mod jacobi;
mod mat;
mod qr;

pub use jacobi::{sym_eig, SymEig};
pub use mat::{ComplexMatrix, LuFactors, Mat, RealMatrix, Scalar};
pub use qr::complex_eig;

use crate::tol::Tolerances;

/// Errors surfaced by the dense kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    NotSquare {
        rows: usize,
        cols: usize,
    },
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    NotSymmetric {
        defect: f64,
    },
    NotOrthonormal {
        defect: f64,
    },
    NotPositiveDefinite {
        min_eigenvalue: f64,
    },
    Singular {
        pivot: f64,
    },
    NoConvergence {
        iterations: usize,
    },
}

impl std::fmt::Display for LinalgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinalgError::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            LinalgError::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            LinalgError::NotSymmetric { defect } => {
                write!(f, "matrix is not symmetric (defect {defect:.3e})")
            }
            LinalgError::NotOrthonormal { defect } => {
                write!(f, "basis columns are not orthonormal (defect {defect:.3e})")
            }
            LinalgError::NotPositiveDefinite { min_eigenvalue } => write!(
                f,
                "matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})"
            ),
            LinalgError::Singular { pivot } => {
                write!(f, "matrix is singular (pivot magnitude {pivot:.3e})")
            }
            LinalgError::NoConvergence { iterations } => {
                write!(
                    f,
                    "eigeniteration failed to converge after {iterations} steps"
                )
            }
        }
    }
}

impl std::error::Error for LinalgError {}

/// Solves `A X = RHS` by LU with partial pivoting.
pub fn solve<T: Scalar>(a: &Mat<T>, rhs: &Mat<T>, tol: &Tolerances) -> Result<Mat<T>, LinalgError> {
    Ok(a.lu_factor(tol.pivot)?.solve(rhs))
}

/// Orthonormal columns spanning `{v : ‖Mv‖ ≤ tol·‖M‖·‖v‖}`, detected through
/// the small eigenvalues of `MᵀM`. Returns an `n×0` matrix when the kernel
/// is trivial.
pub fn nullspace_basis(
    m: &RealMatrix,
    kernel_tol: f64,
    tol: &Tolerances,
) -> Result<RealMatrix, LinalgError> {
    assert!(kernel_tol > 0.0, "kernel tolerance must be positive");
    let gram = m.transpose().mul(m);
    let eig = sym_eig(&gram, tol)?;
    let cutoff = kernel_tol * kernel_tol * gram.norm_inf();
    let n = gram.rows();
    let kept: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] <= cutoff).collect();
    let mut basis = RealMatrix::zeros(n, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        for row in 0..n {
            basis[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    Ok(basis)
}

/// `P = B Bᵀ` for a matrix `B` with orthonormal columns.
pub fn ortho_projector(basis: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    if basis.cols() == 0 {
        return Ok(RealMatrix::zeros(basis.rows(), basis.rows()));
    }
    let gram = basis.transpose().mul(basis);
    let defect = gram.sub(&RealMatrix::identity(basis.cols())).norm_inf();
    if defect > tol.orthonormal {
        return Err(LinalgError::NotOrthonormal { defect });
    }
    Ok(basis.mul(&basis.transpose()))
}

/// Symmetric square root of a symmetric positive-definite matrix.
pub fn sqrt_spd(s: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    spd_power(s, 0.5, tol)
}

/// Inverse square root of a symmetric positive-definite matrix.
pub fn inv_sqrt_spd(s: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    spd_power(s, -0.5, tol)
}

fn spd_power(s: &RealMatrix, power: f64, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    let eig = sym_eig(s, tol)?;
    let floor = tol.spd_floor * s.norm_inf().max(f64::MIN_POSITIVE);
    let n = s.rows();
    if let Some(&min) = eig.eigenvalues.first().filter(|&&min| min <= floor) {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let mut d = RealMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = eig.eigenvalues[i].powf(power);
    }
    Ok(eig.eigenvectors.mul(&d).mul(&eig.eigenvectors.transpose()))
}

/// Orthonormalizes the columns of a tall matrix by modified Gram–Schmidt
/// with one reorthogonalization pass. Columns are assumed independent.
pub fn orthonormal_columns(m: &RealMatrix) -> RealMatrix {
    let rows = m.rows();
    let cols = m.cols();
    let mut q = m.clone();
    for j in 0..cols {
        for _pass in 0..2 {
            for k in 0..j {
                let mut dot = 0.0;
                for i in 0..rows {
                    dot += q[(i, k)] * q[(i, j)];
                }
                for i in 0..rows {
                    let sub = dot * q[(i, k)];
                    q[(i, j)] -= sub;
                }
            }
        }
        let norm: f64 = (0..rows).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        assert!(norm > 0.0, "dependent columns cannot be orthonormalized");
        for i in 0..rows {
            q[(i, j)] /= norm;
        }
    }
    q
}

/// Eigenvalues of a Hermitian complex matrix through its real embedding
/// `[[Re, −Im], [Im, Re]]`; each eigenvalue of the input appears twice in
/// the embedding, so the doubled list is returned sorted ascending and the
/// caller can read extremes directly.
pub fn hermitian_eigenvalues_doubled(
    m: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<Vec<f64>, LinalgError> {
    assert!(m.is_square());
    let n = m.rows();
    let mut embed = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            embed[(i, j)] = z.re;
            embed[(i, j + n)] = -z.im;
            embed[(i + n, j)] = z.im;
            embed[(i + n, j + n)] = z.re;
        }
    }
    Ok(sym_eig(&embed, tol)?.eigenvalues)
}
