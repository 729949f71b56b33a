//! Dense row-major matrices over `f64` or `Complex64`.
//!
//! Everything in this crate works with small matrices (n ≤ 16 for the
//! boundary/flow machinery, small blocks inside the finite-element solver),
//! so the storage is a plain `Vec` and the operations are straightforward
//! triple loops.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::LinalgError;

/// Scalar types the dense kernels operate on.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    fn magnitude(self) -> f64;
    fn conjugate(self) -> Self;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn conjugate(self) -> Self {
        self
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Mat<f64>;
pub type ComplexMatrix = Mat<Complex64>;

impl<T: Scalar> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from nested rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// True when either dimension is zero.
    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Conjugate transpose; plain transpose for real matrices.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conjugate();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        let data = self.data.iter().map(|&a| a * factor).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        self.mul_into(other, &mut out);
        out
    }

    /// `out = self * other` with no allocation; `out` must be preshaped.
    pub fn mul_into(&self, other: &Self, out: &mut Self) {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        assert_eq!((out.rows, out.cols), (self.rows, other.cols));
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = T::zero();
                for k in 0..self.cols {
                    acc += self.data[i * self.cols + k] * other.data[k * other.cols + j];
                }
                out.data[i * other.cols + j] = acc;
            }
        }
    }

    /// Max-row-sum norm; this is the norm every tolerance refers to.
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            let mut row = 0.0;
            for j in 0..self.cols {
                row += self[(i, j)].magnitude();
            }
            best = best.max(row);
        }
        best
    }

    /// `‖M − Mᵀ‖` (or `‖M − M*‖` for complex inputs).
    pub fn self_adjoint_defect(&self) -> f64 {
        assert!(self.is_square());
        self.sub(&self.adjoint()).norm_inf()
    }

    /// Symmetric part `(M + M*)/2`.
    pub fn symmetrized(&self) -> Self {
        self.add(&self.adjoint()).scale(T::from_real(0.5))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.magnitude().is_finite())
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                out[(i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        let data = self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Columnwise Gram product `selfᵀ · other`.
    pub fn gram_with(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = RealMatrix::zeros(self.cols, other.cols);
        for i in 0..self.cols {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.rows {
                    acc += self[(k, i)] * other[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

impl ComplexMatrix {
    pub fn real_part(&self) -> RealMatrix {
        let data = self.data.iter().map(|z| z.re).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn imag_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            let mut row = 0.0;
            for j in 0..self.cols {
                row += self[(i, j)].im.abs();
            }
            best = best.max(row);
        }
        best
    }

    /// `‖M*M − I‖`, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        assert!(self.is_square());
        let gram = self.adjoint().mul(self);
        gram.sub(&ComplexMatrix::identity(self.rows)).norm_inf()
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// The CLI round-trips boundary matrices and potentials through JSON as
// nested rows, so RealMatrix serializes in that shape.
impl serde::Serialize for RealMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)]).collect())
            .collect();
        rows.serialize(ser)
    }
}

impl<'de> serde::Deserialize<'de> for RealMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(RealMatrix::from_rows(&rows))
    }
}

/// LU factorization with partial pivoting.
pub struct LuFactors<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
    swaps: usize,
    pub norm_a: f64,
}

impl<T: Scalar> Mat<T> {
    /// Factor a square matrix; reports `Singular` when a pivot falls below
    /// `pivot_tol · ‖A‖`.
    pub fn lu_factor(&self, pivot_tol: f64) -> Result<LuFactors<T>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let norm_a = self.norm_inf();
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let mut best = k;
            let mut best_mag = lu[(k, k)].magnitude();
            for i in k + 1..n {
                let mag = lu[(i, k)].magnitude();
                if mag > best_mag {
                    best = i;
                    best_mag = mag;
                }
            }
            if best_mag <= pivot_tol * norm_a.max(f64::MIN_POSITIVE) {
                return Err(LinalgError::Singular { pivot: best_mag });
            }
            if best != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(best, j)];
                    lu[(best, j)] = tmp;
                }
                perm.swap(k, best);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(LuFactors {
            lu,
            perm,
            swaps,
            norm_a,
        })
    }
}

impl<T: Scalar> LuFactors<T> {
    pub fn solve(&self, rhs: &Mat<T>) -> Mat<T> {
        let n = self.lu.rows();
        assert_eq!(rhs.rows(), n, "rhs row mismatch");
        let m = rhs.cols();
        let mut x = Mat::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                x[(i, j)] = rhs[(self.perm[i], j)];
            }
        }
        // Forward substitution with unit lower factor.
        for k in 0..n {
            for i in k + 1..n {
                let factor = self.lu[(i, k)];
                for j in 0..m {
                    let sub = factor * x[(k, j)];
                    x[(i, j)] -= sub;
                }
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            let pivot = self.lu[(k, k)];
            for j in 0..m {
                let mut acc = x[(k, j)];
                for i in k + 1..n {
                    acc -= self.lu[(k, i)] * x[(i, j)];
                }
                x[(k, j)] = acc / pivot;
            }
        }
        x
    }

    pub fn det(&self) -> T {
        let n = self.lu.rows();
        let mut det = T::one();
        for k in 0..n {
            det = det * self.lu[(k, k)];
        }
        if self.swaps % 2 == 1 {
            det = -det;
        }
        det
    }
}
