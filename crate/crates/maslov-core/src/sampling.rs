//! Random problem ingredients for the randomized verification suites:
//! valid normalized boundary pairs and smooth symmetric trig-polynomial
//! potentials with a prescribed sup-norm.

use rand::Rng;

use crate::boundary::{cayley_spectrum, normalize_pair, validate_pair, BoundaryPair, Side};
use crate::linalg::RealMatrix;
use crate::shooting::Potential;
use crate::tol::Tolerances;

/// Random orthogonal matrix via Gram–Schmidt on a Gaussian draw.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> RealMatrix {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            cols.push(v);
        }
        if !ok {
            continue;
        }
        let mut m = RealMatrix::zeros(n, n);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        return m;
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller is plenty here.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Pair built from rotated per-direction angles: `a1 = O·diag(sin θ)·Oᵀ`,
/// `a2 = O·diag(cos θ)·Oᵀ`. Exact Dirichlet (θ = π/2) and exact Neumann
/// (θ = 0) directions are mixed in with positive probability; the remaining
/// angles stay away from π/2 so the Robin map is bounded.
fn rotated_angle_pair(n: usize, side: Side, rng: &mut impl Rng, tol: &Tolerances) -> BoundaryPair {
    let o = random_orthogonal(n, rng);
    let margin = 0.08;
    let angles: Vec<f64> = (0..n)
        .map(|_| {
            let coin: f64 = rng.gen_range(0.0..1.0);
            if coin < 0.2 {
                0.0
            } else if coin < 0.4 {
                std::f64::consts::FRAC_PI_2
            } else {
                loop {
                    let th = rng.gen_range(margin..std::f64::consts::PI - margin);
                    if (th - std::f64::consts::FRAC_PI_2).abs() > margin {
                        break th;
                    }
                }
            }
        })
        .collect();
    let mut d1 = RealMatrix::zeros(n, n);
    let mut d2 = RealMatrix::zeros(n, n);
    for i in 0..n {
        d1[(i, i)] = angles[i].sin();
        d2[(i, i)] = angles[i].cos();
    }
    let a1 = o.mul(&d1).mul(&o.transpose());
    let a2 = o.mul(&d2).mul(&o.transpose());
    normalize_pair(&validate_pair(&a1, &a2, side, tol).unwrap(), tol).unwrap()
}

/// Pair from a random complex unitary frame `W = A + iB`: take
/// `a1 = −Bᵀ`, `a2 = Aᵀ`. This reaches every valid normalized pair.
fn frame_pair(n: usize, side: Side, rng: &mut impl Rng, tol: &Tolerances) -> BoundaryPair {
    use num_complex::Complex64;
    // Complex Gram–Schmidt on a Gaussian draw.
    loop {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
                .collect();
            for c in &cols {
                let dot: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            cols.push(v);
        }
        if !ok {
            continue;
        }
        let mut a1 = RealMatrix::zeros(n, n);
        let mut a2 = RealMatrix::zeros(n, n);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                a2[(j, i)] = c[i].re;
                a1[(j, i)] = -c[i].im;
            }
        }
        return normalize_pair(&validate_pair(&a1, &a2, side, tol).unwrap(), tol).unwrap();
    }
}

/// Random valid normalized pair. Draws whose Cayley unitary has an
/// eigenvalue too close to −1 (a nearly unbounded Robin map) are rejected
/// and resampled.
pub fn random_pair(n: usize, side: Side, rng: &mut impl Rng, tol: &Tolerances) -> BoundaryPair {
    loop {
        let pair = if rng.gen_bool(0.5) {
            rotated_angle_pair(n, side, rng, tol)
        } else {
            frame_pair(n, side, rng, tol)
        };
        let spectrum = match cayley_spectrum(&pair, tol) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let safe = spectrum.iter().all(|z| {
            let to_minus_one = (z + 1.0).norm();
            !(1e-9..=0.05).contains(&to_minus_one)
        });
        if safe {
            return pair;
        }
    }
}

/// Random pair whose `a2` has full rank, for identities that invert it.
pub fn random_full_rank_a2_pair(
    n: usize,
    side: Side,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> BoundaryPair {
    let o = random_orthogonal(n, rng);
    let mut d1 = RealMatrix::zeros(n, n);
    let mut d2 = RealMatrix::zeros(n, n);
    for i in 0..n {
        let th =
            rng.gen_range(-std::f64::consts::FRAC_PI_2 + 0.15..std::f64::consts::FRAC_PI_2 - 0.15);
        d1[(i, i)] = th.sin();
        d2[(i, i)] = th.cos();
    }
    let a1 = o.mul(&d1).mul(&o.transpose());
    let a2 = o.mul(&d2).mul(&o.transpose());
    normalize_pair(&validate_pair(&a1, &a2, side, tol).unwrap(), tol).unwrap()
}

/// Symmetric trig polynomial `C₀ + Σ_k A_k cos(kπx) + B_k sin(kπx)` scaled
/// so its sampled sup-norm equals `target_norm`.
pub fn random_trig_potential(n: usize, target_norm: f64, rng: &mut impl Rng) -> Potential {
    let modes = 2usize;
    let mut coeffs: Vec<(RealMatrix, RealMatrix)> = Vec::with_capacity(modes + 1);
    for _ in 0..=modes {
        let mut a = RealMatrix::zeros(n, n);
        let mut b = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.gen_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
                let y = rng.gen_range(-1.0..1.0);
                b[(i, j)] = y;
                b[(j, i)] = y;
            }
        }
        coeffs.push((a, b));
    }

    let eval_raw = {
        let coeffs = coeffs.clone();
        move |x: f64| -> RealMatrix {
            let mut v = coeffs[0].0.clone();
            for (k, (a, b)) in coeffs.iter().enumerate().skip(1) {
                let arg = k as f64 * std::f64::consts::PI * x;
                v = v.add(&a.scale(arg.cos())).add(&b.scale(arg.sin()));
            }
            v
        }
    };

    let sup = (0..=256)
        .map(|i| eval_raw(i as f64 / 256.0).norm_inf())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let scale = target_norm / sup;
    Potential::memoized(n, move |x| eval_raw(x).scale(scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_pairs_are_normalized_and_valid() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..40 {
            let n = 1 + k % 3;
            let p = random_pair(n, Side::Left, &mut rng, &tol);
            assert!(p.normalization_defect() < 1e-9);
            let defect =
                p.a1.mul(&p.a2.transpose())
                    .sub(&p.a2.mul(&p.a1.transpose()))
                    .norm_inf();
            assert!(defect < 1e-9);
        }
    }

    #[test]
    fn trig_potentials_hit_their_norm_and_stay_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let v = random_trig_potential(3, 25.0, &mut rng);
            let sup = v.sup_norm(256);
            assert!((sup - 25.0).abs() < 1e-6, "sup {sup}");
            assert!(v.eval(0.37).self_adjoint_defect() < 1e-12);
        }
    }
}
