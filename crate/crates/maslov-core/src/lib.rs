//! Morse index computation for matrix Schrödinger operators −y″ + V(x)y on
//! [0,1] under separated self-adjoint boundary conditions.
//!
//! The count of negative eigenvalues is obtained from the spectral flow of a
//! family of unitary matrices W̃(s,λ) through −1 along a rectangular path in
//! the (s,λ) plane, plus two small matrix eigenvalue problems built from the
//! boundary data. An independent finite-element discretization cross-checks
//! every count.

pub mod boundary;
pub mod fem;
pub mod linalg;
pub mod maslov;
pub mod morse;
pub mod problems;
pub mod sampling;
pub mod shooting;
pub mod tol;

pub use linalg::{ComplexMatrix, RealMatrix};
pub use morse::{morse_index, MorseReport, Problem, Settings};
pub use shooting::Potential;
pub use tol::Tolerances;
