//! Built-in reference problems used by the CLI and the verification suites.
//!
//! Four 2×2 problems covering the qualitatively different boundary regimes:
//! Dirichlet/Dirichlet, Neumann/Neumann, Robin-left with Neumann-right
//! (first-order shelf branches), and Robin at both ends (second-order
//! branches). The potentials are symmetric by construction, mirroring the
//! upper triangle.

use crate::linalg::RealMatrix;
use crate::morse::{MorseError, Problem, Settings};
use crate::shooting::Potential;

/// Potential of built-in problem 1 (Dirichlet case).
pub fn potential1() -> Potential {
    Potential::memoized(2, |x| {
        let off = 10.0 * x.sin();
        RealMatrix::from_rows(&[vec![-22.0, off], vec![off, -20.0]])
    })
}

/// Potential of built-in problem 2 (Neumann case); the (1,1) entry starts
/// at −109/300 ≈ −0.3633.
pub fn potential2() -> Potential {
    Potential::memoized(2, |x| {
        let c6 = (6.0 * std::f64::consts::PI * x).cos();
        let v11 = -0.13 - 0.7 * c6 / (2.0 + c6);
        RealMatrix::from_rows(&[vec![v11, 0.0], vec![0.0, 1.0]])
    })
}

/// Potential of built-in problem 3 (first-order shelf branches).
pub fn potential3() -> Potential {
    Potential::memoized(2, |x| {
        let off = -7.0 * x.cos();
        RealMatrix::from_rows(&[vec![-13.0 + 12.0 * x * x, off], vec![off, -9.0]])
    })
}

/// Potential of built-in problem 4 (second-order shelf branches); at x = 0
/// the matrix is diag(−10, −5).
pub fn potential4() -> Potential {
    Potential::memoized(2, |x| {
        let off = -3.0 * x;
        RealMatrix::from_rows(&[
            vec![-10.0 - 5.0 * x * x, off],
            vec![off, -5.0 - 7.0 * x * x],
        ])
    })
}

/// Boundary matrices of built-in problem `k` as (a1, a2, b1, b2).
pub fn boundary_matrices(k: usize) -> (RealMatrix, RealMatrix, RealMatrix, RealMatrix) {
    let id = RealMatrix::identity(2);
    let zero = RealMatrix::zeros(2, 2);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match k {
        1 => (id.clone(), zero.clone(), id, zero),
        2 => (zero.clone(), id.clone(), zero, id),
        3 => (id.scale(r), id.scale(r), zero, id),
        4 => (id.scale(r), id.scale(r), id.scale(r), id.scale(r)),
        _ => panic!("built-in problems are numbered 1..=4"),
    }
}

/// Built-in problem `k` in 1..=4 with the given numeric settings.
pub fn builtin(k: usize, settings: Settings) -> Result<Problem, MorseError> {
    let potential = match k {
        1 => potential1(),
        2 => potential2(),
        3 => potential3(),
        4 => potential4(),
        _ => panic!("built-in problems are numbered 1..=4"),
    };
    let (a1, a2, b1, b2) = boundary_matrices(k);
    Problem::new(potential, (a1, a2), (b1, b2), settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::bottom_shelf;
    use crate::linalg::sym_eig;
    use crate::tol::Tolerances;

    #[test]
    fn builtins_validate() {
        for k in 1..=4 {
            let p = builtin(k, Settings::default()).unwrap();
            assert_eq!(p.n(), 2);
        }
    }

    #[test]
    fn problem2_correction_is_v0() {
        // Neumann at both ends: the shelf matrix vanishes and the correction
        // equals V(0) = diag(−109/300, 1).
        let t = Tolerances::default();
        let p = builtin(2, Settings::default()).unwrap();
        let v0 = p.potential.eval(0.0);
        let shelf = bottom_shelf(&p.dec_left, &p.dec_right, &v0, &t).unwrap();
        assert!(shelf.b_matrix.norm_inf() < 1e-12);
        let eigs = sym_eig(&shelf.correction, &t).unwrap().eigenvalues;
        assert!((eigs[0] + 109.0 / 300.0).abs() < 1e-12);
        assert!((eigs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn problem3_shelf_matrix_is_minus_identity() {
        let t = Tolerances::default();
        let p = builtin(3, Settings::default()).unwrap();
        let v0 = p.potential.eval(0.0);
        let shelf = bottom_shelf(&p.dec_left, &p.dec_right, &v0, &t).unwrap();
        assert_eq!(shelf.b_matrix.rows(), 2);
        assert!(shelf.b_matrix.add(&RealMatrix::identity(2)).norm_inf() < 1e-9);
    }

    #[test]
    fn problem2_branch_emerges_at_the_correction_eigenvalue() {
        // The per-unit-length eigenvalue λ(s)/s² of the lowest branch tends
        // to the negative correction eigenvalue −109/300 as s → 0.
        let t = Tolerances::default();
        let p = builtin(2, Settings::default()).unwrap();
        let rows = crate::fem::eigencurves(
            &p.dec_left,
            &p.dec_right,
            &p.potential,
            &[0.02],
            1,
            1000,
            crate::fem::CurveConvention::PerUnitLength,
            &t,
        )
        .unwrap();
        let lowest = rows[0].1[0];
        assert!(
            (lowest + 109.0 / 300.0).abs() < 5e-3,
            "lowest branch at {lowest}"
        );
    }

    #[test]
    fn problem4_correction_eigenvalues() {
        let t = Tolerances::default();
        let p = builtin(4, Settings::default()).unwrap();
        let v0 = p.potential.eval(0.0);
        let shelf = bottom_shelf(&p.dec_left, &p.dec_right, &v0, &t).unwrap();
        assert!(shelf.b_matrix.norm_inf() < 1e-9);
        let eigs = sym_eig(&shelf.correction, &t).unwrap().eigenvalues;
        assert!((eigs[0] + 11.0).abs() < 1e-9);
        assert!((eigs[1] + 6.0).abs() < 1e-9);
    }
}
