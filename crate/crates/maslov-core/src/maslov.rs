//! Spectral flow of the unitary family W̃ through −1.
//!
//! Each Lagrangian frame (X, Z) together with the right-boundary factor B̃
//! determines the unitary matrix `W̃ = (X+iZ)(X−iZ)⁻¹·B̃`. Eigenvalues of W̃
//! sitting at −1 correspond exactly to intersections of the evolving plane
//! with the target plane, so the signed count of eigenvalue phases passing
//! through π along a path is the index this module computes.
//!
//! Counting convention: an eigenvalue is inside the marked arc when its
//! phase lies in [π, π+ε) modulo 2π. Tracking a continuous unwrapped phase
//! u(t) per eigenvalue, the index contribution over a segment is
//! `⌊(u(end)−π)/2π⌋ − ⌊(u(start)−π)/2π⌋`, which reproduces the endpoint
//! rules: arriving counterclockwise exactly at π at the final endpoint
//! counts +1, starting at π and moving counterclockwise counts 0, and
//! arriving at π from above counts 0.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::boundary::{BoundaryPair, TargetData};
use crate::linalg::{complex_eig, solve, ComplexMatrix, LinalgError, RealMatrix};
use crate::shooting::{
    check_frame, initial_state, lagrangian_defect, Frame, FrameState, PairStepper, Potential,
    ShootingError,
};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub enum MaslovError {
    NotUnitary { defect: f64 },
    DegenerateFrame { s: f64, lambda: f64 },
    RefinementExhausted { at: f64, movement: f64 },
    HomotopyCheckFailed { indices: [i64; 4] },
    FormNotHermitian { defect: f64 },
    Shooting(ShootingError),
    Linalg(LinalgError),
}

impl std::fmt::Display for MaslovError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaslovError::NotUnitary { defect } => {
                write!(f, "matrix is not unitary (defect {defect:.3e})")
            }
            MaslovError::DegenerateFrame { s, lambda } => {
                write!(f, "degenerate frame at (s, λ) = ({s}, {lambda})")
            }
            MaslovError::RefinementExhausted { at, movement } => write!(
                f,
                "phase step refinement exhausted near {at} (movement {movement:.3e})"
            ),
            MaslovError::HomotopyCheckFailed { indices } => write!(
                f,
                "box indices {:?} do not sum to zero; a crossing was missed",
                indices
            ),
            MaslovError::FormNotHermitian { defect } => {
                write!(f, "crossing form is not self-adjoint (defect {defect:.3e})")
            }
            MaslovError::Shooting(e) => write!(f, "{e}"),
            MaslovError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MaslovError {}

impl From<ShootingError> for MaslovError {
    fn from(e: ShootingError) -> Self {
        MaslovError::Shooting(e)
    }
}

impl From<LinalgError> for MaslovError {
    fn from(e: LinalgError) -> Self {
        MaslovError::Linalg(e)
    }
}

/// Which edge of the rectangular path a segment lies on, or a custom slice.
///
/// The box is traversed counterclockwise in the (λ, s) plane:
/// Gamma1 runs along s = s₀ with λ from −λ∞ to 0, Gamma2 up the right edge
/// (λ = 0, s from s₀ to 1), Gamma3 along s = 1 with λ from 0 to −λ∞, and
/// Gamma4 back down the left edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SegmentKind {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
    CustomLambdaSlice,
    CustomSSlice,
}

impl SegmentKind {
    /// True when λ is the varying coordinate.
    pub fn varies_lambda(self) -> bool {
        matches!(
            self,
            SegmentKind::Gamma1 | SegmentKind::Gamma3 | SegmentKind::CustomLambdaSlice
        )
    }
}

/// One directed path segment with its fixed coordinate and sampling budget.
#[derive(Debug, Clone, Copy)]
pub struct PathSegment {
    pub kind: SegmentKind,
    pub fixed: f64,
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

impl PathSegment {
    pub fn gamma1(s0: f64, lambda_inf: f64, samples: usize) -> Self {
        PathSegment {
            kind: SegmentKind::Gamma1,
            fixed: s0,
            start: -lambda_inf,
            end: 0.0,
            samples,
        }
    }

    pub fn gamma2(s0: f64, samples: usize) -> Self {
        PathSegment {
            kind: SegmentKind::Gamma2,
            fixed: 0.0,
            start: s0,
            end: 1.0,
            samples,
        }
    }

    pub fn gamma3(lambda_inf: f64, samples: usize) -> Self {
        PathSegment {
            kind: SegmentKind::Gamma3,
            fixed: 1.0,
            start: 0.0,
            end: -lambda_inf,
            samples,
        }
    }

    pub fn gamma4(lambda_inf: f64, s0: f64, samples: usize) -> Self {
        PathSegment {
            kind: SegmentKind::Gamma4,
            fixed: -lambda_inf,
            start: 1.0,
            end: s0,
            samples,
        }
    }

    /// λ-slice at fixed λ, s from s₀ to 1 (used for counts below a level).
    pub fn s_slice(lambda: f64, s0: f64, samples: usize) -> Self {
        PathSegment {
            kind: SegmentKind::CustomSSlice,
            fixed: lambda,
            start: s0,
            end: 1.0,
            samples,
        }
    }

    /// Map the varying coordinate to an (s, λ) point.
    pub fn point(&self, t: f64) -> (f64, f64) {
        if self.kind.varies_lambda() {
            (self.fixed, t)
        } else {
            (t, self.fixed)
        }
    }

    /// Initial sample coordinates. The λ edges anchored at λ = 0 are graded
    /// quadratically toward zero, where phases rotate like `1/√|λ|`; every
    /// other segment samples uniformly.
    pub fn sample_points(&self) -> Vec<f64> {
        let m = self.samples;
        let mut pts: Vec<f64> = match self.kind {
            SegmentKind::Gamma3 => (0..=m)
                .map(|j| {
                    let u = j as f64 / m as f64;
                    self.start + (self.end - self.start) * u * u
                })
                .collect(),
            SegmentKind::Gamma1 => (0..=m)
                .map(|j| {
                    let u = 1.0 - j as f64 / m as f64;
                    self.end + (self.start - self.end) * u * u
                })
                .collect(),
            _ => (0..=m)
                .map(|j| self.start + (self.end - self.start) * j as f64 / m as f64)
                .collect(),
        };
        pts[0] = self.start;
        pts[m] = self.end;
        pts
    }
}

/// A located eigenvalue pass through −1.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrossingEvent {
    /// Value of the varying coordinate at the crossing.
    pub location: f64,
    pub multiplicity: usize,
    /// +1 counterclockwise (phase increasing through π), −1 clockwise.
    pub direction: i64,
}

/// Matched eigenvalue phases along one segment.
#[derive(Debug, Clone, Default)]
pub struct PhasePath {
    /// (coordinate, principal phases in matched order, unwrapped phases).
    pub samples: Vec<(f64, Vec<f64>, Vec<f64>)>,
    pub crossings: Vec<CrossingEvent>,
    pub max_unitarity_defect: f64,
    pub max_det_mismatch: f64,
    /// Largest matched circular movement over a committed step.
    pub max_step_movement: f64,
    /// True when a phase sat at π (within tolerance) at the segment start
    /// or end; the corner conventions then decided the count.
    pub endpoint_at_crossing: bool,
    /// True when the intersection-determinant parity guard flagged a
    /// crossing that could not be separated even at rounding-level steps.
    pub guard_unresolved: bool,
    /// Number of passes through −1 credited from the determinant parity
    /// because the phase sweep itself was narrower than rounding allows.
    pub guard_corrections: usize,
}

/// Anything that can produce W̃ at a point of the (s, λ) plane.
///
/// `sample_at` may additionally expose the intersection determinant
/// `det(β₁X + β₂Z)`, whose zeros are exactly the crossings. Unlike the
/// phases it keeps the exponential envelope of the solutions, so boundary
/// layer crossings that pass the phase through −1 within an exponentially
/// narrow parameter window still flip its sign visibly; the flow uses it as
/// a parity guard against skipped windings.
pub trait FlowMap {
    fn wtilde_at(&self, s: f64, lambda: f64) -> Result<ComplexMatrix, MaslovError>;

    fn sample_at(&self, s: f64, lambda: f64) -> Result<(ComplexMatrix, Option<f64>), MaslovError> {
        Ok((self.wtilde_at(s, lambda)?, None))
    }
}

impl<F> FlowMap for F
where
    F: Fn(f64, f64) -> Result<ComplexMatrix, MaslovError>,
{
    fn wtilde_at(&self, s: f64, lambda: f64) -> Result<ComplexMatrix, MaslovError> {
        self(s, lambda)
    }
}

/// Frame checkpoints along one λ-slice: `states[j]` holds the frame after
/// `j` Simpson pairs, i.e. at `s = j·pair_width`.
struct Trajectory {
    lambda: f64,
    per_unit: usize,
    states: Vec<FrameState>,
}

/// W̃ evaluator backed by frame integration.
///
/// Step density scales with both the slice length and `sqrt(‖V‖ + |λ|)` so
/// eigenvalue phases stay accurate even at the far end of the box, where
/// solutions grow like `exp(√|λ|·s)`. Repeated queries at the same λ (the
/// constant-λ box edges and their refinements) resume from cached
/// checkpoints instead of re-integrating from zero. Not `Sync`; build one
/// evaluator per thread.
pub struct ShootingMap<'a> {
    pub bc0: &'a BoundaryPair,
    pub potential: &'a Potential,
    pub target: &'a TargetData,
    pub steps_per_unit: usize,
    pub tol: &'a Tolerances,
    potential_norm: f64,
    max_rel_defect: Cell<f64>,
    cache: RefCell<Option<Trajectory>>,
}

impl<'a> ShootingMap<'a> {
    pub fn new(
        bc0: &'a BoundaryPair,
        potential: &'a Potential,
        target: &'a TargetData,
        steps_per_unit: usize,
        tol: &'a Tolerances,
    ) -> Self {
        let potential_norm = potential.sup_norm(256);
        ShootingMap {
            bc0,
            potential,
            target,
            steps_per_unit,
            tol,
            potential_norm,
            max_rel_defect: Cell::new(0.0),
            cache: RefCell::new(None),
        }
    }

    /// Steps per unit length for a given λ: the configured base, doubled
    /// until the per-step rotation h·μ stays below ~0.03. Doubling (instead
    /// of a continuous rule) keeps nearby λ on identical grids so memoized
    /// potentials are reused.
    fn per_unit(&self, lambda: f64) -> usize {
        let mu = ((-lambda).max(0.0) + self.potential_norm + 1.0).sqrt();
        let need = 33.0 * mu;
        let mut n = self.steps_per_unit.max(16);
        while (n as f64) < need {
            n *= 2;
        }
        n + n % 2
    }

    pub fn steps_for(&self, s: f64, lambda: f64) -> usize {
        ((self.per_unit(lambda) as f64 * s).ceil() as usize).max(16)
    }

    pub fn frame(&self, s: f64, lambda: f64) -> Result<Frame, MaslovError> {
        assert!(s > 0.0 && s <= 1.0);
        let per_unit = self.per_unit(lambda);
        let pair_width = 2.0 / per_unit as f64;
        let stepper = PairStepper::new(self.potential, lambda);

        let mut slot = self.cache.borrow_mut();
        let rebuild = match slot.as_ref() {
            Some(t) => t.lambda.to_bits() != lambda.to_bits() || t.per_unit != per_unit,
            None => true,
        };
        if rebuild {
            *slot = Some(Trajectory {
                lambda,
                per_unit,
                states: vec![initial_state(self.bc0)],
            });
        }
        let traj = slot.as_mut().unwrap();

        let whole_pairs = (s / pair_width * (1.0 + 1e-14)).floor() as usize;
        while traj.states.len() <= whole_pairs {
            let j = traj.states.len() - 1;
            let mut next = traj.states[j].clone();
            stepper.advance_pair(&mut next, j as f64 * pair_width, pair_width / 2.0);
            traj.states.push(next);
        }
        let checkpoint = whole_pairs.min(traj.states.len() - 1);
        let mut state = traj.states[checkpoint].clone();
        let s_cp = checkpoint as f64 * pair_width;
        let remainder = s - s_cp;
        if remainder > 1e-14 * s.max(1.0) {
            stepper.advance_pair(&mut state, s_cp, remainder / 2.0);
        }
        drop(slot);

        let frame = Frame {
            s,
            lambda,
            x: state.x,
            z: state.z,
            gram: state.gram,
        };
        check_frame(&frame, self.tol)?;
        let rel = lagrangian_defect(&frame)
            / (1.0 + frame.x.norm_inf().powi(2) + frame.z.norm_inf().powi(2));
        if rel > self.max_rel_defect.get() {
            self.max_rel_defect.set(rel);
        }
        Ok(frame)
    }

    /// Largest relative Lagrangian defect seen so far.
    pub fn max_relative_defect(&self) -> f64 {
        self.max_rel_defect.get()
    }
}

impl ShootingMap<'_> {
    /// `det(β₁X + β₂Z)`, recovered from the stored target frame
    /// `(β₂ᵀ, −β₁ᵀ)`; zero exactly at crossings. Factored without a pivot
    /// threshold: near a crossing the tiny pivot IS the signal, and its
    /// sign must survive.
    fn miss_determinant(&self, frame: &Frame) -> f64 {
        let m = self
            .target
            .frame_x
            .transpose()
            .mul(&frame.z)
            .sub(&self.target.frame_z.transpose().mul(&frame.x));
        match m.lu_factor(0.0) {
            Ok(f) => f.det(),
            Err(_) => 0.0,
        }
    }
}

impl FlowMap for ShootingMap<'_> {
    fn wtilde_at(&self, s: f64, lambda: f64) -> Result<ComplexMatrix, MaslovError> {
        let frame = self.frame(s, lambda)?;
        wtilde(&frame, &self.target.factor, self.tol)
    }

    fn sample_at(&self, s: f64, lambda: f64) -> Result<(ComplexMatrix, Option<f64>), MaslovError> {
        let frame = self.frame(s, lambda)?;
        let guard = self.miss_determinant(&frame);
        let w = wtilde(&frame, &self.target.factor, self.tol)?;
        Ok((w, Some(guard)))
    }
}

/// `W̃ = (X+iZ)(X−iZ)⁻¹·B̃`; unitary whenever the frame is Lagrangian.
///
/// The value only depends on the spanned plane, so the frame is first
/// orthonormalized and `U = X+iZ` polar-projected onto the unitary group —
/// for real X, Z one then has `(X−iZ)⁻¹ = Uᵀ`, so `W̃ = U·Uᵀ·B̃` is a
/// product of unitaries and stays unitary to rounding error even when the
/// raw columns span many orders of magnitude (deep λ, boundary layers).
pub fn wtilde(
    frame: &Frame,
    factor: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<ComplexMatrix, MaslovError> {
    let n = frame.x.rows();
    let mut stacked = RealMatrix::zeros(2 * n, n);
    for i in 0..n {
        for j in 0..n {
            stacked[(i, j)] = frame.x[(i, j)];
            stacked[(n + i, j)] = frame.z[(i, j)];
        }
    }
    let q = crate::linalg::orthonormal_columns(&stacked);
    let mut u = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            u[(i, j)] = Complex64::new(q[(i, j)], q[(n + i, j)]);
        }
    }

    // Newton iteration to the unitary polar factor; the distance to start
    // with is the frame's residual Lagrangian defect, so two or three
    // quadratic steps reach rounding level.
    let ident = ComplexMatrix::identity(n);
    for _ in 0..3 {
        let inv_adjoint = match solve(&u.adjoint(), &ident, tol) {
            Ok(m) => m,
            Err(LinalgError::Singular { .. }) => {
                return Err(MaslovError::DegenerateFrame {
                    s: frame.s,
                    lambda: frame.lambda,
                })
            }
            Err(e) => return Err(e.into()),
        };
        u = u.add(&inv_adjoint).scale(Complex64::new(0.5, 0.0));
    }

    let w = u.mul(&u.transpose()).mul(factor);
    let defect = w.unitarity_defect();
    if defect > tol.unitarity {
        return Err(MaslovError::NotUnitary { defect });
    }
    Ok(w)
}

/// Principal arguments of the eigenvalues of a unitary matrix, ascending.
pub fn eigen_phases(w: &ComplexMatrix, tol: &Tolerances) -> Result<Vec<f64>, MaslovError> {
    let defect = w.unitarity_defect();
    if defect > tol.unitarity {
        return Err(MaslovError::NotUnitary { defect });
    }
    let mut phases: Vec<f64> = complex_eig(w, None)?
        .into_iter()
        .map(|z| principal(z.arg()))
        .collect();
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(phases)
}

/// Wrap into (−π, π].
fn principal(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Signed circular difference `b − a` in (−π, π].
fn circ_delta(a: f64, b: f64) -> f64 {
    principal(b - a)
}

/// Assignment of `next` phases to `prev` phases minimizing the total
/// circular distance: exhaustive for n ≤ 6, greedy beyond. Returns the
/// permutation (`perm[i]` is the index in `next` matched to `prev[i]`) and
/// the largest matched circular distance.
pub fn match_phases(prev: &[f64], next: &[f64]) -> (Vec<usize>, f64) {
    let n = prev.len();
    assert_eq!(n, next.len());
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let dist = |i: usize, j: usize| circ_delta(prev[i], next[j]).abs();

    let perm = if n <= 6 {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut idx: Vec<usize> = (0..n).collect();
        permute(&mut idx, 0, &mut |candidate| {
            let total: f64 = (0..n).map(|i| dist(i, candidate[i])).sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, candidate.to_vec()));
            }
        });
        best.unwrap().1
    } else {
        // Greedy: repeatedly take the globally closest unmatched pair.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pairs.push((dist(i, j), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut perm = vec![usize::MAX; n];
        let mut used = vec![false; n];
        let mut placed = 0;
        for (_, i, j) in pairs {
            if perm[i] == usize::MAX && !used[j] {
                perm[i] = j;
                used[j] = true;
                placed += 1;
                if placed == n {
                    break;
                }
            }
        }
        perm
    };

    let max_move = (0..n).map(|i| dist(i, perm[i])).fold(0.0, f64::max);
    (perm, max_move)
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

#[derive(Clone)]
struct SampleData {
    t: f64,
    principal: Vec<f64>,
    unwrapped: Vec<f64>,
    det_arg: f64,
    guard: Option<f64>,
}

fn evaluate_sample(
    map: &dyn FlowMap,
    segment: &PathSegment,
    t: f64,
    tol: &Tolerances,
    path: &mut PhasePath,
) -> Result<(Vec<f64>, f64, Option<f64>), MaslovError> {
    let (s, lambda) = segment.point(t);
    let (w, guard) = map.sample_at(s, lambda)?;
    path.max_unitarity_defect = path.max_unitarity_defect.max(w.unitarity_defect());
    let phases = eigen_phases(&w, tol)?;
    let det = w.lu_factor(tol.pivot)?.det();
    Ok((phases, det.arg(), guard))
}

/// Smallest step the refinement is allowed to take near `t`.
fn step_floor(t_a: f64, t_b: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + t_a.abs().max(t_b.abs()))
}

/// Appends samples covering (prev.t, t_end], bisecting while any matched
/// phase moves more than π/4 over a step or the intersection-determinant
/// parity disagrees with the counted level passes.
#[allow(clippy::too_many_arguments)]
fn advance(
    map: &dyn FlowMap,
    segment: &PathSegment,
    prev: &SampleData,
    t_end: f64,
    tol: &Tolerances,
    path: &mut PhasePath,
    out: &mut Vec<SampleData>,
    depth: usize,
) -> Result<SampleData, MaslovError> {
    let (raw, det_arg, guard) = evaluate_sample(map, segment, t_end, tol, path)?;
    let (perm, movement) = match_phases(&prev.principal, &raw);

    let n = prev.principal.len();
    let mut principal_next = vec![0.0; n];
    let mut unwrapped_next = vec![0.0; n];
    let mut delta_sum = 0.0;
    let mut levels_crossed = 0i64;
    for i in 0..n {
        let p = raw[perm[i]];
        let d = circ_delta(prev.principal[i], p);
        principal_next[i] = p;
        unwrapped_next[i] = prev.unwrapped[i] + d;
        delta_sum += d;
        levels_crossed += (level_count(unwrapped_next[i]) - level_count(prev.unwrapped[i])).abs();
    }
    // The determinant flips sign exactly when an odd number of eigenvalue
    // passes through −1 happened in between; a disagreement means a winding
    // was skipped inside the step. An exactly-zero determinant cannot carry
    // a sign, so it forces refinement toward the root.
    let guard_pair = match (prev.guard, guard) {
        (Some(ga), Some(gb)) => Some((ga, gb)),
        _ => None,
    };
    let flips = guard_pair.map(|(ga, gb)| ga == 0.0 || gb == 0.0 || ga * gb < 0.0);
    let parity_mismatch = flips.is_some_and(|f| f != (levels_crossed % 2 == 1));

    let step = (t_end - prev.t).abs();
    let refinable = step > step_floor(prev.t, t_end) && depth < 90;
    if (movement > PI / 4.0 || parity_mismatch) && refinable {
        let mid_t = 0.5 * (prev.t + t_end);
        let mid = advance(map, segment, prev, mid_t, tol, path, out, depth + 1)?;
        return advance(map, segment, &mid, t_end, tol, path, out, depth + 1);
    }
    if movement > PI / 4.0 {
        return Err(MaslovError::RefinementExhausted {
            at: t_end,
            movement,
        });
    }
    if parity_mismatch {
        if segment.kind.varies_lambda() && flips == Some(true) {
            // The determinant certifies an odd number of passes inside a
            // step too narrow to resolve (a boundary-layer eigenvalue sweeps
            // the phase within an exponentially thin window). Rotation in λ
            // is strictly monotone, so the direction is known; credit one
            // pass to the phase nearest the level.
            let dir = if t_end < prev.t { 1.0 } else { -1.0 };
            let nearest = (0..n)
                .min_by(|&a, &b| {
                    let da = circ_delta(principal_next[a], PI).abs();
                    let db = circ_delta(principal_next[b], PI).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .expect("at least one phase");
            unwrapped_next[nearest] += dir * 2.0 * PI;
            path.guard_corrections += 1;
        } else {
            // Either the direction is not determined (s-slices) or the
            // counted passes exceed what the determinant admits; flag the
            // path instead of guessing.
            path.guard_unresolved = true;
        }
    }

    // Winding consistency: the phase increments must agree with the motion
    // of arg det W̃ modulo 2π.
    let det_delta = principal(det_arg - prev.det_arg);
    let mismatch = principal(det_delta - delta_sum).abs();
    path.max_det_mismatch = path.max_det_mismatch.max(mismatch);
    path.max_step_movement = path.max_step_movement.max(movement);

    let sample = SampleData {
        t: t_end,
        principal: principal_next,
        unwrapped: unwrapped_next,
        det_arg,
        guard,
    };
    out.push(sample.clone());
    Ok(sample)
}

/// Number of levels `π + 2πk` at or below `u`, up to a shared offset.
fn level_count(u: f64) -> i64 {
    ((u - PI) / (2.0 * PI)).floor() as i64
}

/// Snap an unwrapped phase to the nearest `π + 2πk` level when it is within
/// the crossing tolerance, so endpoint conventions apply exactly.
fn snap_to_level(u: f64, tol: &Tolerances) -> (f64, bool) {
    let k = ((u - PI) / (2.0 * PI)).round();
    let level = PI + 2.0 * PI * k;
    if (u - level).abs() <= tol.phase_at_pi {
        (level, true)
    } else {
        (u, false)
    }
}

/// Tracks the eigenvalue phases of W̃ along a segment and counts signed
/// passes through −1.
pub fn spectral_flow(
    segment: &PathSegment,
    map: &dyn FlowMap,
    tol: &Tolerances,
) -> Result<(i64, PhasePath), MaslovError> {
    assert!(segment.samples >= 2, "need at least two samples");
    assert!(segment.start != segment.end, "degenerate segment");

    let mut path = PhasePath::default();
    let (first_phases, first_det, first_guard) =
        evaluate_sample(map, segment, segment.start, tol, &mut path)?;
    let mut samples: Vec<SampleData> = Vec::with_capacity(segment.samples + 1);
    samples.push(SampleData {
        t: segment.start,
        principal: first_phases.clone(),
        unwrapped: first_phases.clone(),
        det_arg: first_det,
        guard: first_guard,
    });

    let mut cursor = 0;
    for &t in &segment.sample_points()[1..] {
        let prev = samples[cursor].clone();
        advance(map, segment, &prev, t, tol, &mut path, &mut samples, 0)?;
        cursor = samples.len() - 1;
    }

    // Endpoint snapping: a phase within tolerance of a level is treated as
    // exactly at −1, which makes the corner rules exact.
    let n = first_phases.len();
    let mut endpoint_hit = false;
    if let Some(first) = samples.first_mut() {
        for i in 0..n {
            let (snapped, hit) = snap_to_level(first.unwrapped[i], tol);
            first.unwrapped[i] = snapped;
            endpoint_hit |= hit;
        }
    }
    if let Some(last) = samples.last_mut() {
        for i in 0..n {
            let (snapped, hit) = snap_to_level(last.unwrapped[i], tol);
            last.unwrapped[i] = snapped;
            endpoint_hit |= hit;
        }
    }
    path.endpoint_at_crossing = endpoint_hit;

    let first = samples.first().unwrap();
    let last = samples.last().unwrap();
    let index: i64 = (0..n)
        .map(|i| level_count(last.unwrapped[i]) - level_count(first.unwrapped[i]))
        .sum();

    path.samples = samples
        .into_iter()
        .map(|s| (s.t, s.principal, s.unwrapped))
        .collect();
    Ok((index, path))
}

/// Spectral flow plus refined crossing events.
pub fn locate_crossings(
    segment: &PathSegment,
    map: &dyn FlowMap,
    tol: &Tolerances,
) -> Result<(i64, PhasePath), MaslovError> {
    let (index, mut path) = spectral_flow(segment, map, tol)?;

    // Raw per-trajectory level passes, one event each.
    let mut raw_events: Vec<CrossingEvent> = Vec::new();
    let n = path.samples.first().map_or(0, |s| s.1.len());
    for w in path.samples.windows(2) {
        let (t_a, ref pr_a, ref un_a) = w[0];
        let (t_b, _, ref un_b) = w[1];
        for i in 0..n {
            let c = level_count(un_b[i]) - level_count(un_a[i]);
            if c == 0 {
                continue;
            }
            debug_assert!(c.abs() == 1, "movement bound keeps one level per step");
            let level = if c > 0 {
                PI + 2.0 * PI * level_count(un_b[i]) as f64
            } else {
                PI + 2.0 * PI * level_count(un_a[i]) as f64
            };
            let location = bisect_level(map, segment, t_a, pr_a, un_a, i, t_b, level, tol)?;
            let (s, lambda) = segment.point(location);
            let w_at = map.wtilde_at(s, lambda)?;
            let phases = eigen_phases(&w_at, tol)?;
            let multiplicity = phases
                .iter()
                .filter(|&&p| circ_delta(p, PI).abs() <= tol.phase_at_pi)
                .count()
                .max(1);
            raw_events.push(CrossingEvent {
                location,
                multiplicity,
                direction: c.signum(),
            });
        }
    }

    // Merge trajectory events that localized the same crossing.
    raw_events.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());
    let merge_tol = 10.0 * tol.crossing_coord;
    let mut merged: Vec<CrossingEvent> = Vec::new();
    let mut group: Vec<CrossingEvent> = Vec::new();
    let flush = |group: &mut Vec<CrossingEvent>, merged: &mut Vec<CrossingEvent>| {
        if group.is_empty() {
            return;
        }
        let loc = group.iter().map(|e| e.location).sum::<f64>() / group.len() as f64;
        let multiplicity = group
            .iter()
            .map(|e| e.multiplicity)
            .max()
            .unwrap()
            .max(group.len());
        merged.push(CrossingEvent {
            location: loc,
            multiplicity,
            direction: group[0].direction,
        });
        group.clear();
    };
    for ev in raw_events {
        let same = group.last().is_some_and(|g| {
            (g.location - ev.location).abs() <= merge_tol && g.direction == ev.direction
        });
        if !same {
            flush(&mut group, &mut merged);
        }
        group.push(ev);
    }
    flush(&mut group, &mut merged);

    path.crossings = merged;
    Ok((index, path))
}

#[allow(clippy::too_many_arguments)]
fn bisect_level(
    map: &dyn FlowMap,
    segment: &PathSegment,
    t_a: f64,
    principal_a: &[f64],
    unwrapped_a: &[f64],
    which: usize,
    t_b: f64,
    level: f64,
    tol: &Tolerances,
) -> Result<f64, MaslovError> {
    // Track the phase continuously from the bracket start; the movement
    // bound guarantees the lift is unambiguous.
    let mut lo = t_a;
    let mut hi = t_b;
    let mut base_principal = principal_a.to_vec();
    let mut base_unwrapped = unwrapped_a.to_vec();
    let mut f_lo = base_unwrapped[which] - level;
    for _ in 0..200 {
        if (hi - lo).abs() <= tol.crossing_coord {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (s, lambda) = segment.point(mid);
        let w = map.wtilde_at(s, lambda)?;
        let raw = eigen_phases(&w, tol)?;
        let (perm, _) = match_phases(&base_principal, &raw);
        let n = base_principal.len();
        let mut mid_principal = vec![0.0; n];
        let mut mid_unwrapped = vec![0.0; n];
        for i in 0..n {
            let p = raw[perm[i]];
            mid_principal[i] = p;
            mid_unwrapped[i] = base_unwrapped[i] + circ_delta(base_principal[i], p);
        }
        let f_mid = mid_unwrapped[which] - level;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            base_principal = mid_principal;
            base_unwrapped = mid_unwrapped;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Indices of the four box edges; their sum vanishes by homotopy invariance
/// and is asserted.
#[derive(Debug, Clone)]
pub struct BoxIndices {
    pub gamma1: i64,
    pub gamma2: i64,
    pub gamma3: i64,
    pub gamma4: i64,
    pub paths: [PhasePath; 4],
}

impl BoxIndices {
    pub fn sum(&self) -> i64 {
        self.gamma1 + self.gamma2 + self.gamma3 + self.gamma4
    }
}

/// Runs the four edges of the rectangle counterclockwise and checks the
/// closed-path identity.
pub fn maslov_box(
    map: &dyn FlowMap,
    s0: f64,
    lambda_inf: f64,
    samples: usize,
    tol: &Tolerances,
) -> Result<BoxIndices, MaslovError> {
    assert!(s0 > 0.0 && s0 < 1.0);
    assert!(lambda_inf > 0.0);
    let (g1, p1) = locate_crossings(&PathSegment::gamma1(s0, lambda_inf, samples), map, tol)?;
    let (g2, p2) = locate_crossings(&PathSegment::gamma2(s0, samples), map, tol)?;
    let (g3, p3) = locate_crossings(&PathSegment::gamma3(lambda_inf, samples), map, tol)?;
    let (g4, p4) = locate_crossings(&PathSegment::gamma4(lambda_inf, s0, samples), map, tol)?;
    let boxed = BoxIndices {
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
        gamma4: g4,
        paths: [p1, p2, p3, p4],
    };
    if boxed.sum() != 0 {
        return Err(MaslovError::HomotopyCheckFailed {
            indices: [g1, g2, g3, g4],
        });
    }
    Ok(boxed)
}

/// λ-direction rotation form `Ω̃ = −2·A*·(∫XᵀX)·A` with `A = (X−iZ)⁻¹B̃`.
///
/// Self-adjoint always; negative definite wherever the Gram integral is
/// positive definite, which is what forces clockwise motion as λ grows.
pub fn omega_lambda(
    frame: &Frame,
    factor: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<ComplexMatrix, MaslovError> {
    let a = frame_factor(frame, factor, tol)?;
    let omega = a
        .adjoint()
        .mul(&frame.gram.to_complex())
        .mul(&a)
        .scale(Complex64::new(-2.0, 0.0));
    check_hermitian(omega, tol)
}

/// s-direction rotation form `Ω̃ = 2·A*·(Xᵀ(V(s)−λ)X − ZᵀZ)·A`; self-adjoint
/// but sign-indefinite in general.
pub fn omega_s(
    frame: &Frame,
    factor: &ComplexMatrix,
    potential: &Potential,
    tol: &Tolerances,
) -> Result<ComplexMatrix, MaslovError> {
    let a = frame_factor(frame, factor, tol)?;
    let n = frame.x.rows();
    let mut w = (*potential.eval(frame.s)).clone();
    for i in 0..n {
        w[(i, i)] -= frame.lambda;
    }
    let core = frame
        .x
        .transpose()
        .mul(&w)
        .mul(&frame.x)
        .sub(&frame.z.transpose().mul(&frame.z));
    let omega = a
        .adjoint()
        .mul(&core.symmetrized().to_complex())
        .mul(&a)
        .scale(Complex64::new(2.0, 0.0));
    check_hermitian(omega, tol)
}

fn frame_factor(
    frame: &Frame,
    factor: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<ComplexMatrix, MaslovError> {
    let i = Complex64::new(0.0, 1.0);
    let minus = frame.x.to_complex().sub(&frame.z.to_complex().scale(i));
    match solve(&minus, factor, tol) {
        Ok(a) => Ok(a),
        Err(LinalgError::Singular { .. }) => Err(MaslovError::DegenerateFrame {
            s: frame.s,
            lambda: frame.lambda,
        }),
        Err(e) => Err(e.into()),
    }
}

fn check_hermitian(m: ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix, MaslovError> {
    let defect = m.self_adjoint_defect();
    if defect > 1e-8_f64.max(tol.unitarity) * (1.0 + m.norm_inf()) {
        return Err(MaslovError::FormNotHermitian { defect });
    }
    Ok(m.add(&m.adjoint()).scale(Complex64::new(0.5, 0.0)))
}
