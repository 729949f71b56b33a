//! Complex eigenvalues of small dense matrices: Householder reduction to
//! Hessenberg form followed by explicitly shifted QR with Givens rotations.

use num_complex::Complex64;

use super::mat::ComplexMatrix;
use super::LinalgError;

/// Reduce to upper Hessenberg form by unitary similarity, in place.
fn hessenberg(h: &mut ComplexMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for the part of column k below the subdiagonal.
        let mut norm_sq = 0.0;
        for i in k + 1..n {
            norm_sq += h[(i, k)].norm_sqr();
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // H ← P H with P = I − β v v* acting on rows k+1..n.
        for j in k..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, i) in (k + 1..n).enumerate() {
                dot += v[idx].conj() * h[(i, j)];
            }
            dot *= beta;
            for (idx, i) in (k + 1..n).enumerate() {
                let sub = v[idx] * dot;
                h[(i, j)] -= sub;
            }
        }
        // H ← H P on columns k+1..n.
        for i in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, j) in (k + 1..n).enumerate() {
                dot += h[(i, j)] * v[idx];
            }
            dot *= beta;
            for (idx, j) in (k + 1..n).enumerate() {
                let sub = dot * v[idx].conj();
                h[(i, j)] -= sub;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
        h[(k + 1, k)] = alpha;
    }
}

/// Complex Givens rotation zeroing `b` in the pair `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let denom = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / denom;
    let s = (a / a.norm()) * b.conj() / denom;
    (c, s)
}

fn eig_2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let q = (((a - d) * 0.5).powi(2) + b * c).sqrt();
    (half_tr + q, half_tr - q)
}

/// Eigenvalues of a square complex matrix. `max_sweeps` bounds the total
/// number of QR steps (default `100·n²`).
pub fn complex_eig(
    m: &ComplexMatrix,
    max_sweeps: Option<usize>,
) -> Result<Vec<Complex64>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }

    let mut h = m.clone();
    hessenberg(&mut h);

    let limit = max_sweeps.unwrap_or(100 * n * n);
    let mut eigs: Vec<Complex64> = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut steps = 0usize;
    let mut stagnation = 0usize;
    let eps = 4.0 * f64::EPSILON;

    loop {
        // Deflate negligible subdiagonals.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            if sub <= eps * (h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm()) {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        let lo = if lo == hi && hi > 0 && h[(hi, hi - 1)].norm() != 0.0 {
            // No split found above; the active block starts at 0.
            0
        } else {
            lo
        };

        if lo == hi {
            eigs.push(h[(hi, hi)]);
            if hi == 0 {
                break;
            }
            hi -= 1;
            stagnation = 0;
            continue;
        }
        if hi - lo == 1 {
            let (l1, l2) = eig_2x2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            eigs.push(l1);
            eigs.push(l2);
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            stagnation = 0;
            continue;
        }

        steps += 1;
        stagnation += 1;
        if steps > limit {
            return Err(LinalgError::NoConvergence { iterations: steps });
        }

        // Wilkinson shift: trailing 2x2 eigenvalue closest to the corner.
        let (l1, l2) = eig_2x2(
            h[(hi - 1, hi - 1)],
            h[(hi - 1, hi)],
            h[(hi, hi - 1)],
            h[(hi, hi)],
        );
        let corner = h[(hi, hi)];
        let mut shift = if (l1 - corner).norm() <= (l2 - corner).norm() {
            l1
        } else {
            l2
        };
        if stagnation > 0 && stagnation.is_multiple_of(12) {
            // Exceptional shift to break rare symmetric stalls.
            shift = corner + Complex64::new(h[(hi, hi - 1)].norm(), 0.0);
        }

        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        // QR on the Hessenberg block via Givens, then RQ.
        let mut rots: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
            for j in i..=hi {
                let top = h[(i, j)];
                let bot = h[(i + 1, j)];
                h[(i, j)] = top * c + bot * s;
                h[(i + 1, j)] = -top * s.conj() + bot * c;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let i = lo + idx;
            let row_end = (i + 2).min(hi + 1);
            for r in lo..row_end {
                let left = h[(r, i)];
                let right = h[(r, i + 1)];
                h[(r, i)] = left * c + right * s.conj();
                h[(r, i + 1)] = -left * s + right * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }

    Ok(eigs)
}
