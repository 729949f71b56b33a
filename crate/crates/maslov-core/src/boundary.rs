//! Separated self-adjoint boundary conditions.
//!
//! A condition `a1·y + a2·y′ = 0` at an endpoint is stored as the matrix
//! pair `(a1, a2)`. Validation checks the self-adjointness identities,
//! normalization rescales the pair so that `a1·a1ᵀ + a2·a2ᵀ = I`, and the
//! decomposition splits ℝⁿ into Dirichlet, Neumann and Robin parts with a
//! symmetric Robin map Λ on the Robin subspace. The bottom-shelf data are
//! the two small matrices whose negative eigenvalues enter the final count.

use num_complex::Complex64;

use crate::linalg::{
    complex_eig, inv_sqrt_spd, nullspace_basis, ortho_projector, solve, sym_eig, ComplexMatrix,
    LinalgError, RealMatrix,
};
use crate::tol::Tolerances;

/// Which endpoint of [0,1] a pair constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A validated boundary condition pair.
#[derive(Debug, Clone)]
pub struct BoundaryPair {
    pub a1: RealMatrix,
    pub a2: RealMatrix,
    pub side: Side,
    normalized: bool,
}

/// Orthogonal Dirichlet/Neumann/Robin split of one endpoint condition.
///
/// `lambda` is the Robin map embedded in ℝⁿ, i.e. it already equals
/// `pR·Λ·pR` and vanishes on the complement of the Robin subspace.
#[derive(Debug, Clone)]
pub struct BKDecomposition {
    pub p_dirichlet: RealMatrix,
    pub p_neumann: RealMatrix,
    pub p_robin: RealMatrix,
    pub lambda: RealMatrix,
}

/// Data derived from the right endpoint: the target frame `(β₂ᵀ, −β₁ᵀ)` and
/// the unitary factor `(β₁ᵀβ₁ − β₂ᵀβ₂) − 2i·β₂ᵀβ₁` that closes W̃.
#[derive(Debug, Clone)]
pub struct TargetData {
    pub frame_x: RealMatrix,
    pub frame_z: RealMatrix,
    pub factor: ComplexMatrix,
}

/// Matrices governing eigenvalue branches that bifurcate from zero as the
/// interval length shrinks: `b_matrix` drives the first-order branches and
/// `correction` the second-order ones on the kernel of `b_matrix`.
#[derive(Debug, Clone)]
pub struct BottomShelfData {
    /// Orthonormal basis of `ker P_D0 ∩ ker P_D1` (n×d).
    pub intersection_basis: RealMatrix,
    /// Restriction of `pR0·Λ0·pR0 − pR1·Λ1·pR1` to the intersection (d×d).
    pub b_matrix: RealMatrix,
    /// Kernel basis of `b_matrix` inside the intersection coordinates (d×d0).
    pub kernel_basis: RealMatrix,
    /// `Q(V(0) − (pR0·Λ0·pR0)²)Q` expressed in the kernel basis (d0×d0).
    pub correction: RealMatrix,
    /// False when the correction has an eigenvalue too close to zero for the
    /// second-order counting to be trusted.
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryError {
    RankDeficient { min_singular_sq: f64 },
    NotSelfAdjoint { defect: f64 },
    DecompositionInconsistent { what: &'static str, defect: f64 },
    Linalg(LinalgError),
}

impl std::fmt::Display for BoundaryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryError::RankDeficient { min_singular_sq } => write!(
                f,
                "[a1 a2] is rank deficient (smallest gram eigenvalue {min_singular_sq:.3e})"
            ),
            BoundaryError::NotSelfAdjoint { defect } => {
                write!(f, "a1·a2ᵀ − a2·a1ᵀ ≠ 0 (defect {defect:.3e})")
            }
            BoundaryError::DecompositionInconsistent { what, defect } => {
                write!(
                    f,
                    "boundary decomposition inconsistent: {what} (defect {defect:.3e})"
                )
            }
            BoundaryError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BoundaryError {}

impl From<LinalgError> for BoundaryError {
    fn from(e: LinalgError) -> Self {
        BoundaryError::Linalg(e)
    }
}

/// Checks rank and self-adjointness of a raw pair.
pub fn validate_pair(
    a1: &RealMatrix,
    a2: &RealMatrix,
    side: Side,
    tol: &Tolerances,
) -> Result<BoundaryPair, BoundaryError> {
    let n = a1.rows();
    assert!(
        a1.is_square() && a2.is_square() && a2.rows() == n,
        "pair must be two n×n matrices"
    );

    // rank [a1 a2] = n, tested through the eigenvalues of the n×n gram
    // matrix [a1 a2][a1 a2]ᵀ = a1·a1ᵀ + a2·a2ᵀ.
    let gram = a1.mul(&a1.transpose()).add(&a2.mul(&a2.transpose()));
    let eig = sym_eig(&gram, tol)?;
    let min = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if min <= 1e-10 * gram.norm_inf().max(f64::MIN_POSITIVE) {
        return Err(BoundaryError::RankDeficient {
            min_singular_sq: min,
        });
    }

    let defect = a1
        .mul(&a2.transpose())
        .sub(&a2.mul(&a1.transpose()))
        .norm_inf();
    let scale = a1.norm_inf().max(a2.norm_inf()).max(1.0);
    if defect > tol.boundary * scale * scale {
        return Err(BoundaryError::NotSelfAdjoint { defect });
    }

    Ok(BoundaryPair {
        a1: a1.clone(),
        a2: a2.clone(),
        side,
        normalized: false,
    })
}

/// Rescales the pair by `(a1·a1ᵀ + a2·a2ᵀ)^{-1/2}` so the normalization
/// identity holds; the boundary condition itself is unchanged.
pub fn normalize_pair(
    pair: &BoundaryPair,
    tol: &Tolerances,
) -> Result<BoundaryPair, BoundaryError> {
    let gram = pair
        .a1
        .mul(&pair.a1.transpose())
        .add(&pair.a2.mul(&pair.a2.transpose()));
    let m = inv_sqrt_spd(&gram, tol)?;
    Ok(BoundaryPair {
        a1: m.mul(&pair.a1),
        a2: m.mul(&pair.a2),
        side: pair.side,
        normalized: true,
    })
}

impl BoundaryPair {
    pub fn n(&self) -> usize {
        self.a1.rows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Normalization defect `‖a1·a1ᵀ + a2·a2ᵀ − I‖`.
    pub fn normalization_defect(&self) -> f64 {
        let gram = self
            .a1
            .mul(&self.a1.transpose())
            .add(&self.a2.mul(&self.a2.transpose()));
        gram.sub(&RealMatrix::identity(self.n())).norm_inf()
    }
}

/// Kernel of one condition matrix of a normalized pair. The cutoff is taken
/// at the pair scale (which is 1 after normalization), not relative to the
/// matrix itself, so a condition matrix that is tiny as a whole reads as a
/// full kernel instead of a full-rank map with an enormous inverse.
fn condition_kernel(m: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, BoundaryError> {
    let gram = m.transpose().mul(m);
    let eig = sym_eig(&gram, tol)?;
    let cutoff = tol.nullspace * tol.nullspace * gram.norm_inf().max(1.0);
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

/// Dirichlet/Neumann/Robin decomposition of a normalized pair.
///
/// The Robin map comes from the Cayley route: with
/// `U = −(a1 − i·a2)⁻¹(a1 + i·a2)` the map is
/// `Λ = −i·((U+I)|_R)⁻¹·(U−I)|_R` on the Robin subspace, which there equals
/// `−a2⁻¹·a1`; both forms are computed and must agree.
pub fn bk_decompose(
    pair: &BoundaryPair,
    tol: &Tolerances,
) -> Result<BKDecomposition, BoundaryError> {
    assert!(pair.normalized, "decomposition needs a normalized pair");
    let n = pair.n();

    let p_d = ortho_projector(&condition_kernel(&pair.a2, tol)?, tol)?;
    let p_n = ortho_projector(&condition_kernel(&pair.a1, tol)?, tol)?;
    let p_r = RealMatrix::identity(n).sub(&p_d).sub(&p_n);

    for (name, a, b) in [
        ("pR·pD", &p_r, &p_d),
        ("pR·pN", &p_r, &p_n),
        ("pD·pN", &p_d, &p_n),
    ] {
        let defect = a.mul(b).norm_inf();
        if defect > tol.boundary {
            return Err(BoundaryError::DecompositionInconsistent { what: name, defect });
        }
    }

    let robin_basis = nullspace_basis(&p_d.add(&p_n), tol.nullspace, tol)?;
    let r = robin_basis.cols();
    let lambda = if r == 0 {
        RealMatrix::zeros(n, n)
    } else {
        // Cayley transform of the pair.
        let a1c = pair.a1.to_complex();
        let a2c = pair.a2.to_complex();
        let i = Complex64::new(0.0, 1.0);
        let minus = a1c.sub(&a2c.scale(i));
        let plus = a1c.add(&a2c.scale(i));
        let u = solve(&minus, &plus, tol)?.scale(Complex64::new(-1.0, 0.0));

        let rc = robin_basis.to_complex();
        let rct = rc.adjoint();
        let ident = ComplexMatrix::identity(n);
        let u_plus = rct.mul(&u.add(&ident)).mul(&rc);
        let u_minus = rct.mul(&u.sub(&ident)).mul(&rc);
        let lam_small = solve(&u_plus, &u_minus, tol)?.scale(Complex64::new(0.0, -1.0));

        let imag = lam_small.imag_norm();
        if imag > tol.cayley_imag * (1.0 + lam_small.norm_inf()) {
            return Err(BoundaryError::DecompositionInconsistent {
                what: "Cayley Robin map has a large imaginary part",
                defect: imag,
            });
        }
        let lam_r = lam_small.real_part().symmetrized();

        // Direct form on the Robin subspace: solve (a2·R)·Λ = −a1·R in the
        // least-squares sense; the system is consistent for valid pairs.
        let m2 = pair.a2.mul(&robin_basis);
        let m1 = pair.a1.mul(&robin_basis);
        let normal = m2.transpose().mul(&m2);
        let rhs = m2.transpose().mul(&m1).scale(-1.0);
        let lam_direct = solve(&normal, &rhs, tol)?;
        let cross = lam_r.sub(&lam_direct).norm_inf();
        if cross > tol.cayley_cross * (1.0 + lam_r.norm_inf()) {
            return Err(BoundaryError::DecompositionInconsistent {
                what: "Cayley and direct Robin maps disagree",
                defect: cross,
            });
        }

        robin_basis.mul(&lam_r).mul(&robin_basis.transpose())
    };

    Ok(BKDecomposition {
        p_dirichlet: p_d,
        p_neumann: p_n,
        p_robin: p_r,
        lambda,
    })
}

impl BKDecomposition {
    /// `‖pD + pN + pR − I‖`, for consistency checks.
    pub fn resolution_defect(&self) -> f64 {
        let n = self.p_dirichlet.rows();
        self.p_dirichlet
            .add(&self.p_neumann)
            .add(&self.p_robin)
            .sub(&RealMatrix::identity(n))
            .norm_inf()
    }
}

/// Target frame and unitary factor from a normalized right pair.
pub fn target_data(pair: &BoundaryPair, tol: &Tolerances) -> Result<TargetData, BoundaryError> {
    assert!(
        pair.side == Side::Right,
        "target data comes from the right endpoint"
    );
    assert!(pair.normalized);
    let b1 = &pair.a1;
    let b2 = &pair.a2;
    let sym = b1.transpose().mul(b1).sub(&b2.transpose().mul(b2));
    let skew = b2.transpose().mul(b1).scale(2.0);
    let factor = sym
        .to_complex()
        .sub(&skew.to_complex().scale(Complex64::new(0.0, 1.0)));

    let defect = factor.unitarity_defect();
    if defect > tol.boundary {
        return Err(BoundaryError::DecompositionInconsistent {
            what: "target factor is not unitary",
            defect,
        });
    }
    let frame_x = b2.transpose();
    let frame_z = b1.transpose().scale(-1.0);
    let lagr = frame_x
        .transpose()
        .mul(&frame_z)
        .sub(&frame_z.transpose().mul(&frame_x))
        .norm_inf();
    if lagr > tol.boundary {
        return Err(BoundaryError::DecompositionInconsistent {
            what: "target frame is not Lagrangian",
            defect: lagr,
        });
    }
    Ok(TargetData {
        frame_x,
        frame_z,
        factor,
    })
}

/// Builds the bottom-shelf matrices from the two endpoint decompositions and
/// the potential value at the left endpoint.
///
/// Degeneracy of the correction is reported through the flag rather than an
/// error so callers can still assemble a (flagged) count.
pub fn bottom_shelf(
    dec0: &BKDecomposition,
    dec1: &BKDecomposition,
    v0: &RealMatrix,
    tol: &Tolerances,
) -> Result<BottomShelfData, BoundaryError> {
    let n = v0.rows();
    assert!(v0.is_square());
    let intersection =
        nullspace_basis(&dec0.p_dirichlet.add(&dec1.p_dirichlet), tol.nullspace, tol)?;
    let d = intersection.cols();
    if d == 0 {
        return Ok(BottomShelfData {
            intersection_basis: RealMatrix::zeros(n, 0),
            b_matrix: RealMatrix::zeros(0, 0),
            kernel_basis: RealMatrix::zeros(0, 0),
            correction: RealMatrix::zeros(0, 0),
            nondegenerate: true,
        });
    }

    let diff = dec0.lambda.sub(&dec1.lambda);
    let b_matrix = intersection
        .transpose()
        .mul(&diff)
        .mul(&intersection)
        .symmetrized();

    let kernel_basis = nullspace_basis(&b_matrix, tol.nullspace, tol)?;
    let kernel_global = intersection.mul(&kernel_basis);
    let lam0_sq = dec0.lambda.mul(&dec0.lambda);
    let correction = kernel_global
        .transpose()
        .mul(&v0.sub(&lam0_sq))
        .mul(&kernel_global)
        .symmetrized();

    let nondegenerate = if correction.cols() == 0 {
        true
    } else {
        let margin = tol.nondegenerate * (1.0 + correction.norm_inf());
        sym_eig(&correction, tol)?
            .eigenvalues
            .iter()
            .all(|ev| ev.abs() > margin)
    };

    Ok(BottomShelfData {
        intersection_basis: intersection,
        b_matrix,
        kernel_basis,
        correction,
        nondegenerate,
    })
}

/// Spectrum of the Cayley unitary of a pair. The random-instance sampler
/// uses it to reject draws whose Robin map would be numerically extreme.
pub(crate) fn cayley_spectrum(
    pair: &BoundaryPair,
    tol: &Tolerances,
) -> Result<Vec<Complex64>, BoundaryError> {
    let a1c = pair.a1.to_complex();
    let a2c = pair.a2.to_complex();
    let i = Complex64::new(0.0, 1.0);
    let minus = a1c.sub(&a2c.scale(i));
    let plus = a1c.add(&a2c.scale(i));
    let u = solve(&minus, &plus, tol)?.scale(Complex64::new(-1.0, 0.0));
    Ok(complex_eig(&u, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn dirichlet(n: usize, side: Side) -> BoundaryPair {
        let p = validate_pair(
            &RealMatrix::identity(n),
            &RealMatrix::zeros(n, n),
            side,
            &tol(),
        )
        .unwrap();
        normalize_pair(&p, &tol()).unwrap()
    }

    fn neumann(n: usize, side: Side) -> BoundaryPair {
        let p = validate_pair(
            &RealMatrix::zeros(n, n),
            &RealMatrix::identity(n),
            side,
            &tol(),
        )
        .unwrap();
        normalize_pair(&p, &tol()).unwrap()
    }

    #[test]
    fn dirichlet_and_neumann_pairs_validate() {
        assert!(validate_pair(
            &RealMatrix::identity(2),
            &RealMatrix::zeros(2, 2),
            Side::Left,
            &tol()
        )
        .is_ok());
        assert!(validate_pair(
            &RealMatrix::zeros(2, 2),
            &RealMatrix::identity(2),
            Side::Left,
            &tol()
        )
        .is_ok());
    }

    #[test]
    fn symplectic_rotation_pair_is_rejected() {
        // (I, J) with J the 2×2 rotation: I·Jᵀ − J·Iᵀ = −2J ≠ 0.
        let j = RealMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let err = validate_pair(&RealMatrix::identity(2), &j, Side::Left, &tol()).unwrap_err();
        assert!(matches!(err, BoundaryError::NotSelfAdjoint { .. }));
    }

    #[test]
    fn rank_deficient_pair_is_rejected() {
        let a1 = RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let a2 = RealMatrix::zeros(2, 2);
        let err = validate_pair(&a1, &a2, Side::Left, &tol()).unwrap_err();
        assert!(matches!(err, BoundaryError::RankDeficient { .. }));
    }

    #[test]
    fn normalization_examples() {
        let t = tol();
        let p = validate_pair(
            &RealMatrix::identity(2).scale(2.0),
            &RealMatrix::zeros(2, 2),
            Side::Left,
            &t,
        )
        .unwrap();
        let n = normalize_pair(&p, &t).unwrap();
        assert!(n.a1.sub(&RealMatrix::identity(2)).norm_inf() < 1e-12);

        let p = validate_pair(
            &RealMatrix::identity(2),
            &RealMatrix::identity(2),
            Side::Left,
            &t,
        )
        .unwrap();
        let n = normalize_pair(&p, &t).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(n.a1.sub(&RealMatrix::identity(2).scale(r)).norm_inf() < 1e-12);
        assert!(n.a2.sub(&RealMatrix::identity(2).scale(r)).norm_inf() < 1e-12);
        assert!(n.normalization_defect() < 1e-12);

        // Normalizing twice changes nothing.
        let again = normalize_pair(&n, &t).unwrap();
        assert!(again.a1.sub(&n.a1).norm_inf() < 1e-12);
    }

    #[test]
    fn bk_dirichlet_and_neumann() {
        let t = tol();
        let d = bk_decompose(&dirichlet(2, Side::Left), &t).unwrap();
        assert!(d.p_dirichlet.sub(&RealMatrix::identity(2)).norm_inf() < 1e-10);
        assert!(d.p_neumann.norm_inf() < 1e-10);
        assert!(d.p_robin.norm_inf() < 1e-10);
        assert!(d.lambda.norm_inf() < 1e-10);

        let n = bk_decompose(&neumann(2, Side::Left), &t).unwrap();
        assert!(n.p_neumann.sub(&RealMatrix::identity(2)).norm_inf() < 1e-10);
        assert!(n.p_dirichlet.norm_inf() < 1e-10);
    }

    #[test]
    fn bk_scalar_robin_map() {
        // (sin θ, cos θ) at θ = π/4: the Robin map is −tan θ = −1.
        let t = tol();
        let th = std::f64::consts::FRAC_PI_4;
        let p = validate_pair(
            &RealMatrix::from_rows(&[vec![th.sin()]]),
            &RealMatrix::from_rows(&[vec![th.cos()]]),
            Side::Left,
            &t,
        )
        .unwrap();
        let p = normalize_pair(&p, &t).unwrap();
        let d = bk_decompose(&p, &t).unwrap();
        assert!((d.p_robin[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((d.lambda[(0, 0)] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn bk_random_pairs_resolve_identity() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..60 {
            let n = 1 + (rand::Rng::gen_range(&mut rng, 0..3)) as usize;
            let pair = sampling::random_pair(n, Side::Left, &mut rng, &t);
            let d = bk_decompose(&pair, &t).unwrap();
            assert!(d.resolution_defect() <= 1e-9);
            assert!(d.p_robin.mul(&d.p_dirichlet).norm_inf() <= 1e-9);
            assert!(d.lambda.self_adjoint_defect() <= 1e-9);
            // lambda is supported on the Robin subspace.
            let proj = d.p_robin.mul(&d.lambda).mul(&d.p_robin);
            assert!(proj.sub(&d.lambda).norm_inf() <= 1e-8 * (1.0 + d.lambda.norm_inf()));
        }
    }

    #[test]
    fn neumann_based_robin_map_matches_direct_inverse() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            let n = 2;
            let pair = sampling::random_full_rank_a2_pair(n, Side::Left, &mut rng, &t);
            let d = bk_decompose(&pair, &t).unwrap();
            // pR·Λ·pR = −a2⁻¹·a1 when a2 has full rank.
            let direct = solve(&pair.a2, &pair.a1, &t).unwrap().scale(-1.0);
            assert!(
                d.lambda.sub(&direct).norm_inf() <= 1e-7 * (1.0 + direct.norm_inf()),
                "defect {}",
                d.lambda.sub(&direct).norm_inf()
            );
        }
    }

    #[test]
    fn target_factor_examples() {
        let t = tol();
        let d = target_data(&dirichlet(2, Side::Right), &t).unwrap();
        assert!(d.factor.sub(&ComplexMatrix::identity(2)).norm_inf() < 1e-12);

        let n = target_data(&neumann(2, Side::Right), &t).unwrap();
        assert!(n.factor.add(&ComplexMatrix::identity(2)).norm_inf() < 1e-12);

        // β1 = β2 = I/√2: factor −i·I.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let p = validate_pair(
            &RealMatrix::identity(2).scale(r),
            &RealMatrix::identity(2).scale(r),
            Side::Right,
            &t,
        )
        .unwrap();
        let p = normalize_pair(&p, &t).unwrap();
        let m = target_data(&p, &t).unwrap();
        let want = ComplexMatrix::identity(2).scale(Complex64::new(0.0, -1.0));
        assert!(m.factor.sub(&want).norm_inf() < 1e-12);
    }

    #[test]
    fn target_factor_unitary_on_random_pairs() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let n = 1 + (rand::Rng::gen_range(&mut rng, 0..3)) as usize;
            let pair = sampling::random_pair(n, Side::Right, &mut rng, &t);
            let d = target_data(&pair, &t).unwrap();
            assert!(d.factor.unitarity_defect() <= 1e-9);
        }
    }

    #[test]
    fn bottom_shelf_first_order_case() {
        // α1 = α2 = I/√2 on the left, Neumann-like (0, I) on the right:
        // B = −I on ℝ², two negative eigenvalues.
        let t = tol();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let left = normalize_pair(
            &validate_pair(
                &RealMatrix::identity(2).scale(r),
                &RealMatrix::identity(2).scale(r),
                Side::Left,
                &t,
            )
            .unwrap(),
            &t,
        )
        .unwrap();
        let right = neumann(2, Side::Right);
        let dec0 = bk_decompose(&left, &t).unwrap();
        let dec1 = bk_decompose(&right, &t).unwrap();
        let shelf = bottom_shelf(&dec0, &dec1, &RealMatrix::zeros(2, 2), &t).unwrap();
        assert_eq!(shelf.b_matrix.rows(), 2);
        assert!(shelf.b_matrix.add(&RealMatrix::identity(2)).norm_inf() < 1e-9);
        assert_eq!(shelf.kernel_basis.cols(), 0);
    }

    #[test]
    fn bottom_shelf_second_order_case() {
        // All four matrices I/√2 and V(0) = diag(−10, −5): B = 0 and the
        // correction is V(0) − I with eigenvalues −11 and −6.
        let t = tol();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mk = |side| {
            normalize_pair(
                &validate_pair(
                    &RealMatrix::identity(2).scale(r),
                    &RealMatrix::identity(2).scale(r),
                    side,
                    &t,
                )
                .unwrap(),
                &t,
            )
            .unwrap()
        };
        let dec0 = bk_decompose(&mk(Side::Left), &t).unwrap();
        let dec1 = bk_decompose(&mk(Side::Right), &t).unwrap();
        let v0 = RealMatrix::from_rows(&[vec![-10.0, 0.0], vec![0.0, -5.0]]);
        let shelf = bottom_shelf(&dec0, &dec1, &v0, &t).unwrap();
        assert!(shelf.b_matrix.norm_inf() < 1e-9);
        let eigs = sym_eig(&shelf.correction, &t).unwrap().eigenvalues;
        assert!((eigs[0] + 11.0).abs() < 1e-9);
        assert!((eigs[1] + 6.0).abs() < 1e-9);
        assert!(shelf.nondegenerate);
    }

    #[test]
    fn bottom_shelf_empty_for_dirichlet() {
        let t = tol();
        let dec0 = bk_decompose(&dirichlet(2, Side::Left), &t).unwrap();
        let dec1 = bk_decompose(&dirichlet(2, Side::Right), &t).unwrap();
        let shelf = bottom_shelf(&dec0, &dec1, &RealMatrix::zeros(2, 2), &t).unwrap();
        assert_eq!(shelf.intersection_basis.cols(), 0);
        assert_eq!(shelf.b_matrix.rows(), 0);
        assert!(shelf.nondegenerate);
    }

    #[test]
    fn bottom_shelf_matches_inverse_formula_for_full_rank_a2() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..30 {
            let n = 2;
            let left = sampling::random_full_rank_a2_pair(n, Side::Left, &mut rng, &t);
            let right = sampling::random_full_rank_a2_pair(n, Side::Right, &mut rng, &t);
            let dec0 = bk_decompose(&left, &t).unwrap();
            let dec1 = bk_decompose(&right, &t).unwrap();
            let v0 = RealMatrix::zeros(n, n);
            let shelf = bottom_shelf(&dec0, &dec1, &v0, &t).unwrap();
            assert_eq!(shelf.b_matrix.rows(), n);
            // b = β2⁻¹β1 − α2⁻¹α1, expressed in the intersection basis.
            let b_full = solve(&right.a2, &right.a1, &t)
                .unwrap()
                .sub(&solve(&left.a2, &left.a1, &t).unwrap());
            let k = &shelf.intersection_basis;
            let want = k.transpose().mul(&b_full).mul(k);
            assert!(
                shelf.b_matrix.sub(&want).norm_inf() <= 1e-7 * (1.0 + want.norm_inf()),
                "defect {}",
                shelf.b_matrix.sub(&want).norm_inf()
            );
            assert!(
                shelf.b_matrix.self_adjoint_defect() <= 1e-9 * (1.0 + shelf.b_matrix.norm_inf())
            );
            assert!(
                shelf.correction.self_adjoint_defect()
                    <= 1e-9 * (1.0 + shelf.correction.norm_inf())
            );
        }
    }
}
