//! Independent finite-element cross-check.
//!
//! The operator family is discretized through its quadratic form
//! `h(s)(u,v) = ⟨u′,v′⟩ + s²⟨V(s·)u,v⟩ + s(Λ̄₀u(0),u(0)) − s(Λ̄₁u(1),u(1))`
//! with the Dirichlet components of the endpoint values eliminated, using
//! piecewise-linear elements on a uniform mesh. Eigenvalue counts come from
//! the inertia of `K − σM` (block-tridiagonal LDLᵀ), which matches the
//! generalized problem by Sylvester's law since the mass matrix is positive
//! definite; individual eigenvalues are localized by bisection on the same
//! count.

use crate::boundary::BKDecomposition;
use crate::linalg::{nullspace_basis, sym_eig, LinalgError, RealMatrix};
use crate::shooting::Potential;
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub enum FemError {
    MeshSensitivity {
        coarse: usize,
        fine: usize,
        count_coarse: usize,
        count_fine: usize,
    },
    BracketFailed {
        bound: f64,
    },
    Linalg(LinalgError),
}

impl std::fmt::Display for FemError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FemError::MeshSensitivity { coarse, fine, count_coarse, count_fine } => write!(
                f,
                "negative count changed under mesh doubling: {count_coarse} at N={coarse}, {count_fine} at N={fine}"
            ),
            FemError::BracketFailed { bound } => {
                write!(f, "could not bracket the requested eigenvalues below {bound}")
            }
            FemError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FemError {}

impl From<LinalgError> for FemError {
    fn from(e: LinalgError) -> Self {
        FemError::Linalg(e)
    }
}

/// Symmetric block-tridiagonal matrix: diagonal blocks plus the blocks one
/// step above the diagonal (the transposes sit below).
#[derive(Debug, Clone)]
struct BlockTridiag {
    diag: Vec<RealMatrix>,
    off: Vec<RealMatrix>,
}

impl BlockTridiag {
    fn scale_add(&self, other: &BlockTridiag, factor: f64) -> BlockTridiag {
        BlockTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a.add(&b.scale(-factor)))
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a.add(&b.scale(-factor)))
                .collect(),
        }
    }
}

/// Assembled Galerkin form in the constrained endpoint basis.
#[derive(Debug, Clone)]
pub struct DiscretizedForm {
    pub mesh_n: usize,
    pub n: usize,
    pub s: f64,
    stiffness: BlockTridiag,
    mass: BlockTridiag,
    /// Orthonormal bases of the admissible endpoint values (complement of
    /// the Dirichlet subspace) at x = 0 and x = 1.
    pub left_basis: RealMatrix,
    pub right_basis: RealMatrix,
    /// Magnitude scale of the assembled operator entries, used for relative
    /// cutoffs.
    pub scale: f64,
}

/// Assembles the form for the operator squeezed to length `s` (potential
/// `s²·V(s·x)`, boundary maps scaled by `s`). At `s = 1` this is the
/// original operator.
pub fn assemble(
    dec0: &BKDecomposition,
    dec1: &BKDecomposition,
    potential: &Potential,
    s: f64,
    mesh_n: usize,
    tol: &Tolerances,
) -> Result<DiscretizedForm, FemError> {
    assert!(mesh_n >= 64, "mesh too coarse");
    assert!(s > 0.0 && s <= 1.0);
    let n = potential.dim();
    let h = 1.0 / mesh_n as f64;

    let mut k_diag = vec![RealMatrix::zeros(n, n); mesh_n + 1];
    let mut k_off = vec![RealMatrix::zeros(n, n); mesh_n];
    let mut m_diag = vec![RealMatrix::zeros(n, n); mesh_n + 1];
    let mut m_off = vec![RealMatrix::zeros(n, n); mesh_n];

    let ident = RealMatrix::identity(n);
    let s2 = s * s;
    // Two-point Gauss on each element keeps the O(h²) eigenvalue accuracy.
    let gauss_offset = 0.5 / 3.0f64.sqrt();
    let gauss = [0.5 - gauss_offset, 0.5 + gauss_offset];

    for e in 0..mesh_n {
        let x_left = e as f64 * h;
        // Stiffness from u′v′.
        let kk = ident.scale(1.0 / h);
        k_diag[e] = k_diag[e].add(&kk);
        k_diag[e + 1] = k_diag[e + 1].add(&kk);
        k_off[e] = k_off[e].add(&kk.scale(-1.0));
        // Mass.
        m_diag[e] = m_diag[e].add(&ident.scale(h / 3.0));
        m_diag[e + 1] = m_diag[e + 1].add(&ident.scale(h / 3.0));
        m_off[e] = m_off[e].add(&ident.scale(h / 6.0));
        // Potential term s²·V(s·x) with hat-function weights.
        for &g in &gauss {
            let x = x_left + g * h;
            let w = potential.eval(s * x);
            let wl = 1.0 - g;
            let wr = g;
            let weight = s2 * h / 2.0;
            k_diag[e] = k_diag[e].add(&w.scale(weight * wl * wl));
            k_diag[e + 1] = k_diag[e + 1].add(&w.scale(weight * wr * wr));
            k_off[e] = k_off[e].add(&w.scale(weight * wl * wr));
        }
    }

    // Robin boundary terms: +s·Λ̄₀ at x = 0, −s·Λ̄₁ at x = 1.
    k_diag[0] = k_diag[0].add(&dec0.lambda.scale(s));
    k_diag[mesh_n] = k_diag[mesh_n].add(&dec1.lambda.scale(-s));

    // Eliminate Dirichlet endpoint components by restricting the endpoint
    // blocks to the admissible subspace.
    let left_basis = nullspace_basis(&dec0.p_dirichlet, tol.nullspace, tol)?;
    let right_basis = nullspace_basis(&dec1.p_dirichlet, tol.nullspace, tol)?;
    let restrict = |tri: &mut BlockTridiag| {
        tri.diag[0] = left_basis.transpose().mul(&tri.diag[0]).mul(&left_basis);
        if !tri.off.is_empty() {
            tri.off[0] = left_basis.transpose().mul(&tri.off[0]);
        }
        let last = tri.diag.len() - 1;
        tri.diag[last] = right_basis
            .transpose()
            .mul(&tri.diag[last])
            .mul(&right_basis);
        if last >= 1 {
            tri.off[last - 1] = tri.off[last - 1].mul(&right_basis);
        }
    };

    let mut stiffness = BlockTridiag {
        diag: k_diag,
        off: k_off,
    };
    let mut mass = BlockTridiag {
        diag: m_diag,
        off: m_off,
    };
    restrict(&mut stiffness);
    restrict(&mut mass);

    let scale =
        1.0 + s2 * potential.sup_norm(256) + s * (dec0.lambda.norm_inf() + dec1.lambda.norm_inf());

    Ok(DiscretizedForm {
        mesh_n,
        n,
        s,
        stiffness,
        mass,
        left_basis,
        right_basis,
        scale,
    })
}

impl DiscretizedForm {
    /// Number of generalized eigenvalues strictly below `sigma`, via the
    /// inertia of `K − σM`. Pivot eigenvalues too close to zero (σ lands on
    /// an eigenvalue) are clamped away from zero before inversion; this
    /// shifts the count by at most the multiplicity of a coincidence, which
    /// is immaterial for bisection.
    pub fn count_below(&self, sigma: f64) -> Result<usize, FemError> {
        let tol = Tolerances::default();
        let pencil = self.stiffness.scale_add(&self.mass, sigma);
        let mut negatives = 0usize;
        let mut schur: Option<RealMatrix> = None;
        for (idx, d) in pencil.diag.iter().enumerate() {
            let s_block = match &schur {
                None => d.clone(),
                Some(prev_inv_part) => d.sub(prev_inv_part),
            };
            if idx < pencil.off.len() {
                let next_n = pencil.diag[idx + 1].rows();
                if s_block.rows() == 0 {
                    schur = Some(RealMatrix::zeros(next_n, next_n));
                    continue;
                }
                let eig = sym_eig(&s_block.symmetrized(), &tol)?;
                negatives += eig.eigenvalues.iter().filter(|&&ev| ev < 0.0).count();
                // Next Schur complement D_{i+1} − Eᵀ S⁻¹ E with a clamped
                // inverse built from the pivot eigendecomposition.
                let floor = 1e-13 * s_block.norm_inf().max(f64::MIN_POSITIVE);
                let e = &pencil.off[idx];
                let vt_e = eig.eigenvectors.transpose().mul(e);
                let mut scaled = vt_e.clone();
                for i in 0..scaled.rows() {
                    let ev = eig.eigenvalues[i];
                    let inv = if ev.abs() <= floor {
                        1.0 / if ev < 0.0 { -floor } else { floor }
                    } else {
                        1.0 / ev
                    };
                    for j in 0..scaled.cols() {
                        scaled[(i, j)] *= inv;
                    }
                }
                schur = Some(vt_e.transpose().mul(&scaled));
            } else if s_block.rows() > 0 {
                let eig = sym_eig(&s_block.symmetrized(), &tol)?;
                negatives += eig.eigenvalues.iter().filter(|&&ev| ev < 0.0).count();
            }
        }
        Ok(negatives)
    }

    /// Count of eigenvalues below `−cutoff`.
    pub fn negative_count(&self, cutoff: f64) -> Result<usize, FemError> {
        self.count_below(-cutoff)
    }

    /// The `k` lowest generalized eigenvalues by inertia bisection.
    pub fn lowest_eigenvalues(&self, k: usize) -> Result<Vec<f64>, FemError> {
        assert!(
            (1..=8).contains(&k),
            "eigenvalue count must be within 1..=8"
        );
        // Bracket below the spectrum.
        let mut lo = -10.0 * self.scale - 10.0;
        let mut tries = 0;
        while self.count_below(lo)? > 0 {
            lo *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(FemError::BracketFailed { bound: lo });
            }
        }
        // Bracket above the k-th eigenvalue.
        let mut hi = self.scale.max(1.0);
        tries = 0;
        while self.count_below(hi)? < k {
            hi = hi * 2.0 + 1.0;
            tries += 1;
            if tries > 60 {
                return Err(FemError::BracketFailed { bound: hi });
            }
        }

        let mut out = Vec::with_capacity(k);
        for j in 1..=k {
            let mut a = lo;
            let mut b = hi;
            while b - a > 1e-11 * (1.0 + a.abs().max(b.abs())) {
                let mid = 0.5 * (a + b);
                if self.count_below(mid)? >= j {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        Ok(out)
    }

    /// Dense copies of the constrained stiffness and mass matrices; only
    /// used by tests and small diagnostics.
    pub fn dense(&self) -> (RealMatrix, RealMatrix) {
        let sizes: Vec<usize> = self.stiffness.diag.iter().map(|d| d.rows()).collect();
        let total: usize = sizes.iter().sum();
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0usize, |acc, &s| {
                let here = *acc;
                *acc += s;
                Some(here)
            })
            .collect();
        let fill = |tri: &BlockTridiag| {
            let mut m = RealMatrix::zeros(total, total);
            for (b, d) in tri.diag.iter().enumerate() {
                for i in 0..d.rows() {
                    for j in 0..d.cols() {
                        m[(offsets[b] + i, offsets[b] + j)] = d[(i, j)];
                    }
                }
            }
            for (b, e) in tri.off.iter().enumerate() {
                for i in 0..e.rows() {
                    for j in 0..e.cols() {
                        m[(offsets[b] + i, offsets[b + 1] + j)] = e[(i, j)];
                        m[(offsets[b + 1] + j, offsets[b] + i)] = e[(i, j)];
                    }
                }
            }
            m
        };
        (fill(&self.stiffness), fill(&self.mass))
    }
}

/// Negative count with a mesh-doubling stability check.
pub fn negative_count_stable(
    dec0: &BKDecomposition,
    dec1: &BKDecomposition,
    potential: &Potential,
    s: f64,
    mesh_n: usize,
    tol: &Tolerances,
) -> Result<usize, FemError> {
    let coarse = assemble(dec0, dec1, potential, s, mesh_n, tol)?;
    let cutoff = tol.fem_negative * coarse.scale;
    let count_coarse = coarse.negative_count(cutoff)?;
    let fine = assemble(dec0, dec1, potential, s, 2 * mesh_n, tol)?;
    let count_fine = fine.negative_count(cutoff)?;
    if count_coarse != count_fine {
        return Err(FemError::MeshSensitivity {
            coarse: mesh_n,
            fine: 2 * mesh_n,
            count_coarse,
            count_fine,
        });
    }
    Ok(count_fine)
}

/// Which eigenvalue normalization a curve table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveConvention {
    /// Eigenvalues λ(s) of the squeezed operator on [0,1].
    Squeezed,
    /// λ(s)/s², the eigenvalues of the original operator on [0,s].
    PerUnitLength,
}

impl CurveConvention {
    pub fn label(self) -> &'static str {
        match self {
            CurveConvention::Squeezed => "H(s)",
            CurveConvention::PerUnitLength => "H_s",
        }
    }
}

/// Lowest-k eigenvalue table over a grid of interval lengths.
#[allow(clippy::too_many_arguments)]
pub fn eigencurves(
    dec0: &BKDecomposition,
    dec1: &BKDecomposition,
    potential: &Potential,
    s_grid: &[f64],
    k: usize,
    mesh_n: usize,
    convention: CurveConvention,
    tol: &Tolerances,
) -> Result<Vec<(f64, Vec<f64>)>, FemError> {
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let form = assemble(dec0, dec1, potential, s, mesh_n, tol)?;
        let mut eigs = form.lowest_eigenvalues(k)?;
        if convention == CurveConvention::PerUnitLength {
            for e in eigs.iter_mut() {
                *e /= s * s;
            }
        }
        rows.push((s, eigs));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{bk_decompose, normalize_pair, validate_pair, Side};
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn decomposed(a1: RealMatrix, a2: RealMatrix, side: Side) -> BKDecomposition {
        let t = tol();
        bk_decompose(
            &normalize_pair(&validate_pair(&a1, &a2, side, &t).unwrap(), &t).unwrap(),
            &t,
        )
        .unwrap()
    }

    fn dirichlet_dec(n: usize, side: Side) -> BKDecomposition {
        decomposed(RealMatrix::identity(n), RealMatrix::zeros(n, n), side)
    }

    fn neumann_dec(n: usize, side: Side) -> BKDecomposition {
        decomposed(RealMatrix::zeros(n, n), RealMatrix::identity(n), side)
    }

    #[test]
    fn free_dirichlet_spectrum() {
        let t = tol();
        let d0 = dirichlet_dec(1, Side::Left);
        let d1 = dirichlet_dec(1, Side::Right);
        let form = assemble(&d0, &d1, &Potential::zero(1), 1.0, 2000, &t).unwrap();
        let eigs = form.lowest_eigenvalues(3).unwrap();
        for (k, e) in eigs.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((e - exact).abs() < 1e-3 * exact, "mode {k}: {e} vs {exact}");
        }
        assert_eq!(form.negative_count(1e-8).unwrap(), 0);
    }

    #[test]
    fn free_neumann_lowest_is_zero() {
        let t = tol();
        let d0 = neumann_dec(1, Side::Left);
        let d1 = neumann_dec(1, Side::Right);
        let form = assemble(&d0, &d1, &Potential::zero(1), 1.0, 500, &t).unwrap();
        let eigs = form.lowest_eigenvalues(2).unwrap();
        assert!(eigs[0].abs() < 1e-8);
        assert!((eigs[1] - PI * PI).abs() < 1e-2 * PI * PI);
    }

    #[test]
    fn robin_terms_land_on_the_corners() {
        // α₁ = α₂ = β₁ = β₂ = 1/√2 gives Λ = −1 at both ends, so the form
        // carries −u(0)² and +u(1)².
        let t = tol();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let dec0 = decomposed(
            RealMatrix::identity(1).scale(r),
            RealMatrix::identity(1).scale(r),
            Side::Left,
        );
        let dec1 = decomposed(
            RealMatrix::identity(1).scale(r),
            RealMatrix::identity(1).scale(r),
            Side::Right,
        );
        let n_mesh = 100;
        let form = assemble(&dec0, &dec1, &Potential::zero(1), 1.0, n_mesh, &t).unwrap();
        let (k, _) = form.dense();
        let h = 1.0 / n_mesh as f64;
        assert!((k[(0, 0)] - (1.0 / h - 1.0)).abs() < 1e-9);
        let last = k.rows() - 1;
        assert!((k[(last, last)] - (1.0 / h + 1.0)).abs() < 1e-9);
        // The boundary-layer mode u = e^{−x} has eigenvalue −1.
        let eigs = form.lowest_eigenvalues(1).unwrap();
        assert!((eigs[0] + 1.0).abs() < 1e-3, "{}", eigs[0]);
    }

    #[test]
    fn assembled_form_is_symmetric() {
        let t = tol();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let dec0 = decomposed(
            RealMatrix::identity(2).scale(r),
            RealMatrix::identity(2).scale(r),
            Side::Left,
        );
        let dec1 = neumann_dec(2, Side::Right);
        let v = Potential::new(2, |x| RealMatrix::from_rows(&[vec![-3.0, x], vec![x, 2.0]]));
        let form = assemble(&dec0, &dec1, &v, 0.7, 80, &t).unwrap();
        let (k, m) = form.dense();
        assert!(k.self_adjoint_defect() <= 1e-10 * k.norm_inf());
        assert!(m.self_adjoint_defect() <= 1e-12 * m.norm_inf());
        // Mass must be positive definite.
        let eigs = sym_eig(&m, &t).unwrap().eigenvalues;
        assert!(eigs[0] > 0.0);
    }

    #[test]
    fn eigenvalue_convergence_is_second_order() {
        let t = tol();
        let d0 = dirichlet_dec(1, Side::Left);
        let d1 = dirichlet_dec(1, Side::Right);
        let exact = PI * PI;
        let err = |n: usize| {
            let form = assemble(&d0, &d1, &Potential::zero(1), 1.0, n, &t).unwrap();
            (form.lowest_eigenvalues(1).unwrap()[0] - exact).abs()
        };
        let ratio = err(200) / err(400);
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_well_counts_two_modes() {
        let t = tol();
        let d0 = dirichlet_dec(1, Side::Left);
        let d1 = dirichlet_dec(1, Side::Right);
        let v = Potential::constant(RealMatrix::from_rows(&[vec![-50.0]]));
        let count = negative_count_stable(&d0, &d1, &v, 1.0, 500, &t).unwrap();
        assert_eq!(count, 2);
    }

    #[test]
    fn squeezed_family_tracks_scaling() {
        // Dirichlet, V = 0: λ₁(s) = π² independently of squeezing... the
        // squeezed operator keeps the same spectrum at V = 0, while the
        // per-unit-length convention divides by s².
        let t = tol();
        let d0 = dirichlet_dec(1, Side::Left);
        let d1 = dirichlet_dec(1, Side::Right);
        let rows = eigencurves(
            &d0,
            &d1,
            &Potential::zero(1),
            &[0.5, 1.0],
            1,
            400,
            CurveConvention::PerUnitLength,
            &t,
        )
        .unwrap();
        assert!((rows[0].1[0] - PI * PI / 0.25).abs() < 0.05 * PI * PI / 0.25);
        assert!((rows[1].1[0] - PI * PI).abs() < 0.01 * PI * PI);
    }
}
