//! One record of numerical tolerances shared across the crate.
//!
//! Every tolerance is relative to a matrix norm (max-row-sum) unless stated
//! otherwise. The defaults are what the rest of the crate asserts against;
//! loosen or tighten them through the problem settings.

/// Tolerance settings used by the dense kernels and everything above them.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Accepted asymmetry in `sym_eig` inputs, relative to the matrix norm.
    pub symmetry: f64,
    /// Jacobi sweep target: off-diagonal norm relative to the matrix norm.
    pub jacobi_off: f64,
    /// Kernel detection threshold for `nullspace_basis`.
    pub nullspace: f64,
    /// Orthonormality defect accepted by `ortho_projector`.
    pub orthonormal: f64,
    /// Relative pivot threshold below which LU reports a singular matrix.
    pub pivot: f64,
    /// Relative eigenvalue floor for `sqrt_spd`.
    pub spd_floor: f64,
    /// Boundary-pair self-adjointness and normalization defect.
    pub boundary: f64,
    /// Accepted imaginary part when the Cayley route produces the Robin map.
    pub cayley_imag: f64,
    /// Agreement between the Cayley and direct forms of the Robin map.
    pub cayley_cross: f64,
    /// Lagrangian defect bound, relative to `1 + ‖X‖² + ‖Z‖²`.
    pub lagrangian: f64,
    /// Unitarity defect accepted when extracting eigenvalue phases.
    pub unitarity: f64,
    /// Circular distance to π within which a phase counts as a crossing.
    pub phase_at_pi: f64,
    /// Coordinate width to which crossings are localized by bisection.
    pub crossing_coord: f64,
    /// Relative spectral margin for the non-degeneracy flag.
    pub nondegenerate: f64,
    /// Per-step mismatch allowed between summed phase increments and the
    /// winding of `det W̃`.
    pub det_winding: f64,
    /// Largest sampled jump per unit length accepted by the potential
    /// continuity check.
    pub potential_lipschitz: f64,
    /// Negative-eigenvalue cutoff used by the finite-element count,
    /// relative to the problem scale.
    pub fem_negative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-9,
            jacobi_off: 1e-12,
            nullspace: 1e-8,
            orthonormal: 1e-10,
            pivot: 1e-13,
            spd_floor: 1e-12,
            boundary: 1e-9,
            cayley_imag: 1e-8,
            cayley_cross: 1e-7,
            lagrangian: 1e-9,
            unitarity: 1e-6,
            phase_at_pi: 1e-6,
            crossing_coord: 1e-8,
            nondegenerate: 1e-6,
            det_winding: 1e-6,
            potential_lipschitz: 1e4,
            fem_negative: 1e-8,
        }
    }
}
