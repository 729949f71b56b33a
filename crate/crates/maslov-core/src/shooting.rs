//! Frame propagation.
//!
//! Solutions of −y″ + V(x)y = λy that satisfy the left boundary condition
//! span an n-dimensional plane; its trace at x = s is encoded by the pair
//! (X(s,λ), Z(s,λ)) evolved from (a2ᵀ, −a1ᵀ) under X′ = Z, Z′ = (V−λ)X.
//! The integrator also accumulates ∫₀ˢ XᵀX dt, which later feeds the
//! λ-direction rotation form.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type MemoMap = Arc<Mutex<HashMap<u64, Arc<RealMatrix>>>>;

use crate::boundary::{BoundaryPair, Side};
use crate::linalg::{sym_eig, LinalgError, RealMatrix};
use crate::tol::Tolerances;

/// A symmetric matrix potential on [0,1], evaluated lazily.
///
/// Expression-backed potentials coming from the CLI are wrapped with
/// memoization; evaluation must stay reentrant either way.
#[derive(Clone)]
pub struct Potential {
    dim: usize,
    f: Arc<dyn Fn(f64) -> RealMatrix + Send + Sync>,
    memo: Option<MemoMap>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Potential(dim={})", self.dim)
    }
}

impl Potential {
    pub fn new<F: Fn(f64) -> RealMatrix + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Potential {
            dim,
            f: Arc::new(f),
            memo: None,
        }
    }

    /// Same as [`Potential::new`] but caches evaluations keyed on the bit
    /// pattern of `x`; integration grids revisit the same points many times.
    pub fn memoized<F: Fn(f64) -> RealMatrix + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Potential {
            dim,
            f: Arc::new(f),
            memo: Some(Arc::new(Mutex::new(HashMap::new()))),
        }
    }

    pub fn constant(m: RealMatrix) -> Self {
        assert!(m.is_square());
        let dim = m.rows();
        Potential::new(dim, move |_| m.clone())
    }

    pub fn zero(dim: usize) -> Self {
        Potential::new(dim, move |_| RealMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: f64) -> Arc<RealMatrix> {
        if let Some(memo) = &self.memo {
            let mut map = memo.lock().unwrap();
            if let Some(hit) = map.get(&x.to_bits()) {
                return hit.clone();
            }
            let value = Arc::new((self.f)(x));
            map.insert(x.to_bits(), value.clone());
            return value;
        }
        Arc::new((self.f)(x))
    }

    /// Max-row-sum norm over a uniform grid; the spectral bound below the
    /// box uses this as ‖V‖∞.
    pub fn sup_norm(&self, grid: usize) -> f64 {
        (0..=grid)
            .map(|i| self.eval(i as f64 / grid as f64).norm_inf())
            .fold(0.0, f64::max)
    }

    /// Sampled symmetry and continuity check.
    pub fn validate(&self, grid: usize, tol: &Tolerances) -> Result<(), ShootingError> {
        let mut prev: Option<Arc<RealMatrix>> = None;
        let h = 1.0 / grid as f64;
        for i in 0..=grid {
            let x = i as f64 * h;
            let v = self.eval(x);
            if v.rows() != self.dim || v.cols() != self.dim {
                return Err(ShootingError::BadPotential {
                    what: "dimension mismatch",
                    value: v.rows() as f64,
                });
            }
            if !v.all_finite() {
                return Err(ShootingError::BadPotential {
                    what: "non-finite entry",
                    value: x,
                });
            }
            let defect = v.self_adjoint_defect();
            if defect > tol.symmetry * (1.0 + v.norm_inf()) {
                return Err(ShootingError::BadPotential {
                    what: "not symmetric",
                    value: defect,
                });
            }
            if let Some(p) = prev {
                let jump = v.sub(&p).norm_inf();
                if jump > tol.potential_lipschitz * h * (1.0 + v.norm_inf()) {
                    return Err(ShootingError::BadPotential {
                        what: "discontinuity between grid points",
                        value: jump,
                    });
                }
            }
            prev = Some(v);
        }
        Ok(())
    }
}

/// Trace of the evolving solution plane at (s, λ).
#[derive(Debug, Clone)]
pub struct Frame {
    pub s: f64,
    pub lambda: f64,
    pub x: RealMatrix,
    pub z: RealMatrix,
    /// Accumulated ∫₀ˢ Xᵀ(t)X(t) dt on the integration grid.
    pub gram: RealMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShootingError {
    StepTooCoarse { defect: f64, bound: f64 },
    GridTooCoarse { at: f64, det_dip: f64 },
    BadPotential { what: &'static str, value: f64 },
    Linalg(LinalgError),
}

impl std::fmt::Display for ShootingError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShootingError::StepTooCoarse { defect, bound } => write!(
                f,
                "integration step too coarse: Lagrangian defect {defect:.3e} exceeds {bound:.3e}"
            ),
            ShootingError::GridTooCoarse { at, det_dip } => write!(
                f,
                "grid too coarse near s = {at}: |det X| dips to {det_dip:.3e} without a sign change"
            ),
            ShootingError::BadPotential { what, value } => {
                write!(f, "invalid potential: {what} ({value:.3e})")
            }
            ShootingError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ShootingError {}

impl From<LinalgError> for ShootingError {
    fn from(e: LinalgError) -> Self {
        ShootingError::Linalg(e)
    }
}

/// Coefficient matrix of the first-order system: `[[0, I], [V(x) − λI, 0]]`.
pub fn system_matrix(x: f64, lambda: f64, v: &Potential) -> RealMatrix {
    let n = v.dim();
    let vx = v.eval(x);
    let mut a = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = vx[(i, j)];
        }
        a[(n + i, i)] -= lambda;
    }
    a
}

/// `‖XᵀZ − ZᵀX‖`, zero exactly when the frame spans a Lagrangian plane.
pub fn lagrangian_defect(frame: &Frame) -> f64 {
    frame
        .x
        .transpose()
        .mul(&frame.z)
        .sub(&frame.z.transpose().mul(&frame.x))
        .norm_inf()
}

/// Frame data mid-propagation: current (X, Z) plus the accumulated Gram
/// integral up to the same point.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub x: RealMatrix,
    pub z: RealMatrix,
    pub gram: RealMatrix,
}

/// Initial data at x = 0 from a normalized left pair: (a2ᵀ, −a1ᵀ).
pub fn initial_state(bc0: &BoundaryPair) -> FrameState {
    assert!(
        bc0.side == Side::Left,
        "initial data comes from the left pair"
    );
    assert!(bc0.is_normalized(), "left pair must be normalized");
    let n = bc0.n();
    FrameState {
        x: bc0.a2.transpose(),
        z: bc0.a1.transpose().scale(-1.0),
        gram: RealMatrix::zeros(n, n),
    }
}

/// Advances a frame state by Simpson-compatible pairs of RK4 steps, so the
/// Gram integral is fourth-order accurate on the same grid. Trajectories can
/// be resumed from any stored state, which lets slice evaluators share work.
pub struct PairStepper<'a> {
    v: &'a Potential,
    lambda: f64,
    n: usize,
}

impl<'a> PairStepper<'a> {
    pub fn new(v: &'a Potential, lambda: f64) -> Self {
        PairStepper {
            v,
            lambda,
            n: v.dim(),
        }
    }

    fn coefficient(&self, t: f64) -> RealMatrix {
        let vx = self.v.eval(t);
        let mut w = (*vx).clone();
        for i in 0..self.n {
            w[(i, i)] -= self.lambda;
        }
        w
    }

    fn rk4_step(&self, x: &mut RealMatrix, z: &mut RealMatrix, t: f64, h: f64) {
        let w0 = self.coefficient(t);
        let wm = self.coefficient(t + 0.5 * h);
        let w1 = self.coefficient(t + h);
        let k1x = z.clone();
        let k1z = w0.mul(x);
        let x2 = x.add(&k1x.scale(0.5 * h));
        let z2 = z.add(&k1z.scale(0.5 * h));
        let k2x = z2;
        let k2z = wm.mul(&x2);
        let x3 = x.add(&k2x.scale(0.5 * h));
        let z3 = z.add(&k2z.scale(0.5 * h));
        let k3x = z3;
        let k3z = wm.mul(&x3);
        let x4 = x.add(&k3x.scale(h));
        let z4 = z.add(&k3z.scale(h));
        let k4x = z4;
        let k4z = w1.mul(&x4);
        *x = x.add(
            &k1x.add(&k2x.scale(2.0))
                .add(&k3x.scale(2.0))
                .add(&k4x)
                .scale(h / 6.0),
        );
        *z = z.add(
            &k1z.add(&k2z.scale(2.0))
                .add(&k3z.scale(2.0))
                .add(&k4z)
                .scale(h / 6.0),
        );
    }

    /// Two RK4 steps of size `h` from time `t0`, with the Gram integral over
    /// [t0, t0+2h] added by Simpson's rule.
    pub fn advance_pair(&self, state: &mut FrameState, t0: f64, h: f64) {
        let g0 = state.x.gram_with(&state.x);
        self.rk4_step(&mut state.x, &mut state.z, t0, h);
        let g1 = state.x.gram_with(&state.x);
        self.rk4_step(&mut state.x, &mut state.z, t0 + h, h);
        let g2 = state.x.gram_with(&state.x);
        state.gram = state
            .gram
            .add(&g0.add(&g1.scale(4.0)).add(&g2).scale(h / 3.0));
    }
}

/// Relative Lagrangian defect bound for a finished frame.
pub fn check_frame(frame: &Frame, tol: &Tolerances) -> Result<(), ShootingError> {
    let defect = lagrangian_defect(frame);
    let scale = 1.0 + frame.x.norm_inf().powi(2) + frame.z.norm_inf().powi(2);
    let bound = tol.lagrangian * scale;
    if defect.is_nan() || defect > bound {
        return Err(ShootingError::StepTooCoarse { defect, bound });
    }
    Ok(())
}

/// Classic fixed-step fourth-order Runge–Kutta propagation of the frame from
/// the left boundary data to x = s, with the Gram integral accumulated by
/// composite Simpson quadrature on the same grid.
pub fn integrate_frame(
    bc0: &BoundaryPair,
    v: &Potential,
    lambda: f64,
    s: f64,
    steps: usize,
) -> Result<Frame, ShootingError> {
    assert!(s > 0.0 && s <= 1.0, "s must lie in (0, 1]");
    assert!(steps >= 16, "need at least 16 steps");
    assert_eq!(v.dim(), bc0.n());

    // Simpson pairs steps, so force an even count.
    let steps = steps + steps % 2;
    let h = s / steps as f64;
    let stepper = PairStepper::new(v, lambda);
    let mut state = initial_state(bc0);
    for pair in 0..steps / 2 {
        stepper.advance_pair(&mut state, (2 * pair) as f64 * h, h);
    }
    let frame = Frame {
        s,
        lambda,
        x: state.x,
        z: state.z,
        gram: state.gram,
    };
    check_frame(&frame, &Tolerances::default())?;
    Ok(frame)
}

fn det_x(
    bc0: &BoundaryPair,
    v: &Potential,
    s: f64,
    steps: usize,
    tol: &Tolerances,
) -> Result<f64, ShootingError> {
    let frame = integrate_frame(bc0, v, 0.0, s, steps)?;
    match frame.x.lu_factor(tol.pivot) {
        Ok(f) => Ok(f.det()),
        Err(LinalgError::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

fn singular_count(x: &RealMatrix, tol: &Tolerances) -> Result<usize, ShootingError> {
    let gram = x.transpose().mul(x);
    let eig = sym_eig(&gram, tol)?;
    let cutoff = 1e-7 * x.norm_inf().max(f64::MIN_POSITIVE);
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&ev| ev.max(0.0).sqrt() <= cutoff)
        .count())
}

/// Total kernel dimension of X(s, 0) over a grid of interior points, for a
/// problem whose right condition is Dirichlet. Zeros of det X are located by
/// sign changes and refined by bisection; multiplicity is the number of
/// singular values of X below `1e−7·‖X‖` at the refined point.
pub fn dirichlet_kernel_count(
    bc0: &BoundaryPair,
    v: &Potential,
    s_grid: &[f64],
    steps_per_unit: usize,
    tol: &Tolerances,
) -> Result<Vec<(f64, usize)>, ShootingError> {
    assert!(
        s_grid.windows(2).all(|w| w[0] < w[1]),
        "grid must be increasing"
    );
    assert!(
        s_grid.iter().all(|&s| s > 0.0 && s < 1.0),
        "grid must lie inside (0, 1)"
    );

    let steps_for = |s: f64| ((steps_per_unit as f64 * s).ceil() as usize).max(16);
    let mut crossings = Vec::new();
    let mut prev_s = s_grid[0];
    let mut prev_det = det_x(bc0, v, prev_s, steps_for(prev_s), tol)?;

    for &s in &s_grid[1..] {
        let det = det_x(bc0, v, s, steps_for(s), tol)?;
        if prev_det == 0.0 {
            // Landed exactly on a zero; count it at the grid point.
            let frame = integrate_frame(bc0, v, 0.0, prev_s, steps_for(prev_s))?;
            crossings.push((prev_s, singular_count(&frame.x, tol)?));
        } else if det != 0.0 && det.signum() != prev_det.signum() {
            let mut lo = prev_s;
            let mut hi = s;
            let mut f_lo = prev_det;
            while hi - lo > 1e-8 {
                let mid = 0.5 * (lo + hi);
                let f_mid = det_x(bc0, v, mid, steps_for(mid), tol)?;
                if f_mid == 0.0 {
                    lo = mid;
                    break;
                }
                if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let frame = integrate_frame(bc0, v, 0.0, root, steps_for(root))?;
            let mult = singular_count(&frame.x, tol)?.max(1);
            crossings.push((root, mult));
        } else if det != 0.0 && prev_det.signum() == det.signum() {
            // An even-multiplicity zero hides between same-sign samples as a
            // dip of |det| toward zero; flag instead of miscounting.
            let dip = prev_det.abs().min(det.abs());
            if dip < 1e-12 {
                return Err(ShootingError::GridTooCoarse {
                    at: s,
                    det_dip: dip,
                });
            }
        }
        prev_s = s;
        prev_det = det;
    }
    Ok(crossings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{normalize_pair, validate_pair};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn dirichlet_left(n: usize) -> BoundaryPair {
        normalize_pair(
            &validate_pair(
                &RealMatrix::identity(n),
                &RealMatrix::zeros(n, n),
                Side::Left,
                &tol(),
            )
            .unwrap(),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn system_matrix_examples() {
        let v = Potential::zero(1);
        let a = system_matrix(0.3, 0.0, &v);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], 0.0);

        let a = system_matrix(0.0, -1.0, &v);
        assert_eq!(a[(1, 0)], 1.0);

        let v = Potential::new(1, |x| RealMatrix::from_rows(&[vec![x]]));
        let a = system_matrix(0.5, 2.0, &v);
        assert!((a[(1, 0)] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn free_dirichlet_frame_is_linear() {
        // V = 0, λ = 0: X(x) = −x·I, Z ≡ −I.
        let frame = integrate_frame(&dirichlet_left(2), &Potential::zero(2), 0.0, 1.0, 64).unwrap();
        assert!(frame.x.add(&RealMatrix::identity(2)).norm_inf() < 1e-10);
        assert!(frame.z.add(&RealMatrix::identity(2)).norm_inf() < 1e-10);
        // gram = ∫ x² dx · I = I/3.
        assert!(
            frame
                .gram
                .sub(&RealMatrix::identity(2).scale(1.0 / 3.0))
                .norm_inf()
                < 1e-10
        );
    }

    #[test]
    fn hyperbolic_frame_matches_closed_form() {
        // λ = −μ², n = 1: X(x) = −sinh(μx)/μ, Z(x) = −cosh(μx).
        let mu = 2.0f64;
        let frame =
            integrate_frame(&dirichlet_left(1), &Potential::zero(1), -mu * mu, 1.0, 2000).unwrap();
        assert!((frame.x[(0, 0)] + mu.sinh() / mu).abs() < 1e-8);
        assert!((frame.z[(0, 0)] + mu.cosh()).abs() < 1e-8);
    }

    #[test]
    fn tiny_interval_keeps_initial_data() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let pair = normalize_pair(
            &validate_pair(
                &RealMatrix::identity(2).scale(r),
                &RealMatrix::identity(2).scale(r),
                Side::Left,
                &tol(),
            )
            .unwrap(),
            &tol(),
        )
        .unwrap();
        let v = Potential::constant(RealMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, -2.0]]));
        let frame = integrate_frame(&pair, &v, 5.0, 1e-6, 16).unwrap();
        assert!(frame.x.sub(&pair.a2.transpose()).norm_inf() < 1e-5);
        assert!(frame.z.add(&pair.a1.transpose()).norm_inf() < 1e-5);
    }

    #[test]
    fn rk4_order_check() {
        // Error against the hyperbolic closed form shrinks by ≥ 12 per
        // doubling of the step count.
        let mu = 3.0f64;
        let exact = -mu.sinh() / mu;
        let mut errs = Vec::new();
        for steps in [50usize, 100, 200] {
            let frame = integrate_frame(
                &dirichlet_left(1),
                &Potential::zero(1),
                -mu * mu,
                1.0,
                steps,
            )
            .unwrap();
            errs.push((frame.x[(0, 0)] - exact).abs());
        }
        assert!(errs[0] / errs[1] >= 12.0, "ratio {}", errs[0] / errs[1]);
        assert!(errs[1] / errs[2] >= 12.0, "ratio {}", errs[1] / errs[2]);
    }

    #[test]
    fn defect_of_non_lagrangian_pair() {
        let frame = Frame {
            s: 1.0,
            lambda: 0.0,
            x: RealMatrix::identity(2),
            z: RealMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]),
            gram: RealMatrix::zeros(2, 2),
        };
        assert!((lagrangian_defect(&frame) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn defect_stays_small_with_coupling() {
        let v = Potential::new(2, |x| {
            RealMatrix::from_rows(&[vec![-22.0, 10.0 * x.sin()], vec![10.0 * x.sin(), -20.0]])
        });
        for s in [0.05, 0.3, 0.7, 1.0] {
            let frame = integrate_frame(&dirichlet_left(2), &v, -5.0, s, 2000).unwrap();
            let scale = 1.0 + frame.x.norm_inf().powi(2) + frame.z.norm_inf().powi(2);
            assert!(lagrangian_defect(&frame) <= 1e-9 * scale);
            // Gram stays positive semidefinite and the frame keeps rank n.
            let eigs = sym_eig(&frame.gram, &tol()).unwrap().eigenvalues;
            assert!(eigs[0] >= -1e-10);
            assert!(eigs[0] > 0.0);
            let big_gram = frame
                .x
                .transpose()
                .mul(&frame.x)
                .add(&frame.z.transpose().mul(&frame.z));
            assert!(sym_eig(&big_gram, &tol()).unwrap().eigenvalues[0] > 1e-8);
        }
    }

    #[test]
    fn free_problem_has_no_interior_kernels() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let found =
            dirichlet_kernel_count(&dirichlet_left(1), &Potential::zero(1), &grid, 2000, &tol())
                .unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn constant_well_kernel_locations() {
        // V = −50: zeros of sin(√50·s) at kπ/√50 for k = 1, 2.
        let v = Potential::constant(RealMatrix::from_rows(&[vec![-50.0]]));
        let grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let found = dirichlet_kernel_count(&dirichlet_left(1), &v, &grid, 2000, &tol()).unwrap();
        assert_eq!(found.len(), 2);
        let root = 50.0f64.sqrt();
        assert!((found[0].0 - std::f64::consts::PI / root).abs() < 1e-6);
        assert!((found[1].0 - 2.0 * std::f64::consts::PI / root).abs() < 1e-6);
        assert_eq!(found[0].1 + found[1].1, 2);
    }

    #[test]
    fn double_kernel_is_flagged_as_coarse_grid() {
        // Two identical wells give det X = (sin(√50 s)/√50)², which dips to
        // zero without changing sign. A grid point close to the double root
        // sees the dip and must flag instead of miscounting.
        let v = Potential::constant(RealMatrix::from_rows(&[vec![-50.0, 0.0], vec![0.0, -50.0]]));
        let near_root = std::f64::consts::PI / 50.0f64.sqrt() - 1e-8;
        let grid = vec![0.3, near_root, 0.6, 0.8];
        let err = dirichlet_kernel_count(&dirichlet_left(2), &v, &grid, 2000, &tol()).unwrap_err();
        assert!(matches!(err, ShootingError::GridTooCoarse { .. }));
    }
}
