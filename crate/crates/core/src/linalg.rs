//! Small dense symmetric linear algebra: cyclic Jacobi eigendecomposition
//! and a pseudo-inverse solver for (possibly singular) normal equations.
//!
//! Matrices here are tiny (<= ~100 on a side: feature covariances and
//! surrogate-model normal equations), so Jacobi's robustness and
//! determinism beat asymptotics.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix: `a = V diag(values) V^T`.
/// `vectors[c]` is the eigenvector for `values[c]`, stored column-wise:
/// component r of eigenvector c sits at `vectors[r * d + c]`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub dim: usize,
}

fn off_diagonal_norm<T: Scalar>(a: &[T], d: usize) -> T {
    let mut s = T::zero();
    for r in 0..d {
        for c in 0..d {
            if r != c {
                s += a[r * d + c] * a[r * d + c];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi sweeps. Converges quadratically for symmetric input; we
/// cap sweeps defensively and error out if rotation never settles.
pub fn sym_eigen<T: Scalar>(a: &[T], d: usize) -> Result<SymEigen<T>> {
    if a.len() != d * d || d == 0 {
        return Err(Error::Numerical(format!(
            "sym_eigen: matrix buffer {} does not match dim {}",
            a.len(),
            d
        )));
    }
    for r in 0..d {
        for c in 0..r {
            let diff = (a[r * d + c] - a[c * d + r]).abs();
            let scale = a[r * d + c].abs().max(a[c * d + r].abs()).max(T::one());
            if diff > T::cast(1e-8) * scale {
                return Err(Error::Numerical(format!(
                    "sym_eigen: input not symmetric at ({r},{c})"
                )));
            }
        }
    }

    let mut m = a.to_vec();
    // Symmetrize exactly so rotations stay consistent.
    for r in 0..d {
        for c in 0..r {
            let avg = (m[r * d + c] + m[c * d + r]) * T::cast(0.5);
            m[r * d + c] = avg;
            m[c * d + r] = avg;
        }
    }
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }

    let scale = off_diagonal_norm(&m, d).max(m.iter().fold(T::zero(), |acc, x| acc.max(x.abs())));
    let tol = T::cast(1e-14) * scale.max(T::cast(1e-300));

    for _sweep in 0..64 {
        if off_diagonal_norm(&m, d) <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq.abs() <= tol * T::cast(1e-2) {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (T::cast(2.0) * apq);
                // Numerically stable tangent of the rotation angle.
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    if off_diagonal_norm(&m, d) > T::cast(1e-8) * scale.max(T::one()) {
        return Err(Error::Numerical("sym_eigen: Jacobi sweeps did not converge".into()));
    }

    let mut order: Vec<usize> = (0..d).collect();
    let diag: Vec<T> = (0..d).map(|i| m[i * d + i]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = vec![T::zero(); d * d];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..d {
            vectors[r * d + new_c] = v[r * d + old_c];
        }
    }
    Ok(SymEigen { values, vectors, dim: d })
}

impl<T: Scalar> SymEigen<T> {
    /// Rebuilds `V f(diag) V^T`.
    pub fn reassemble(&self, f: impl Fn(T) -> T) -> Vec<T> {
        let d = self.dim;
        let mut out = vec![T::zero(); d * d];
        for c in 0..d {
            let fv = f(self.values[c]);
            if fv == T::zero() {
                continue;
            }
            for r in 0..d {
                let vr = self.vectors[r * d + c] * fv;
                if vr == T::zero() {
                    continue;
                }
                for r2 in 0..d {
                    out[r * d + r2] += vr * self.vectors[r2 * d + c];
                }
            }
        }
        out
    }
}

/// Dot product with four independent accumulation chains. The fixed
/// chunking keeps results bit-deterministic; avoiding `mul_add` matters
/// because without FMA codegen it lowers to a libm call.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (qa, qb) in ca.by_ref().zip(cb.by_ref()) {
        s0 += qa[0] * qb[0];
        s1 += qa[1] * qb[1];
        s2 += qa[2] * qb[2];
        s3 += qa[3] * qb[3];
    }
    let mut acc = (s0 + s1) + (s2 + s3);
    for (ra, rb) in ca.remainder().iter().zip(cb.remainder()) {
        acc += *ra * *rb;
    }
    acc
}

/// `out += k * x`, elementwise over equal-length slices.
pub fn axpy<T: Scalar>(k: T, x: &[T], out: &mut [T]) {
    debug_assert_eq!(x.len(), out.len());
    for (o, xv) in out.iter_mut().zip(x) {
        *o += *xv * k;
    }
}

pub fn mat_mul<T: Scalar>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            axpy(aip, &b[p * m..(p + 1) * m], &mut out[i * m..(i + 1) * m]);
        }
    }
    out
}

/// Solution of a symmetric positive semi-definite system via eigen
/// pseudo-inverse. Rank-deficient systems get the least-norm solution and
/// are flagged.
pub struct PsdSolution<T> {
    pub x: Vec<T>,
    pub rank_deficient: bool,
}

pub fn solve_psd<T: Scalar>(a: &[T], b: &[T], d: usize) -> Result<PsdSolution<T>> {
    if b.len() != d {
        return Err(Error::Numerical("solve_psd: rhs length mismatch".into()));
    }
    let eig = sym_eigen(a, d)?;
    let max_ev = eig.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = max_ev * T::cast(1e-12) + T::cast(1e-300);
    let mut rank_deficient = false;

    // x = V diag(1/lambda) V^T b, zeroing tiny eigenvalues.
    let mut proj = vec![T::zero(); d];
    for c in 0..d {
        let mut dot = T::zero();
        for r in 0..d {
            dot += eig.vectors[r * d + c] * b[r];
        }
        if eig.values[c].abs() <= tol {
            rank_deficient = true;
            proj[c] = T::zero();
        } else {
            proj[c] = dot / eig.values[c];
        }
    }
    let mut x = vec![T::zero(); d];
    for r in 0..d {
        let mut acc = T::zero();
        for c in 0..d {
            acc += eig.vectors[r * d + c] * proj[c];
        }
        x[r] = acc;
    }
    Ok(PsdSolution { x, rank_deficient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_normal, rng_from};

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let a = vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let e = sym_eigen(&a, 3).unwrap();
        assert_close(e.values[0], 1.0, 1e-12, "ev0");
        assert_close(e.values[1], 2.0, 1e-12, "ev1");
        assert_close(e.values[2], 3.0, 1e-12, "ev2");
    }

    #[test]
    fn two_by_two_hand_case() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let e = sym_eigen(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert_close(e.values[0], 1.0, 1e-12, "ev0");
        assert_close(e.values[1], 3.0, 1e-12, "ev1");
    }

    #[test]
    fn reconstruction_and_orthogonality_on_random_symmetric() {
        let mut rng = rng_from(11);
        for trial in 0..20 {
            let d = 1 + (trial % 9);
            let mut g = vec![0.0f64; d * d];
            fill_normal(&mut g, 0.0, 1.0, &mut rng);
            let mut a = vec![0.0f64; d * d];
            for r in 0..d {
                for c in 0..d {
                    a[r * d + c] = 0.5 * (g[r * d + c] + g[c * d + r]);
                }
            }
            let e = sym_eigen(&a, d).unwrap();
            let back = e.reassemble(|x| x);
            for i in 0..d * d {
                assert_close(back[i], a[i], 1e-9, "reassemble");
            }
            // V^T V = I
            for c1 in 0..d {
                for c2 in 0..d {
                    let mut dot = 0.0;
                    for r in 0..d {
                        dot += e.vectors[r * d + c1] * e.vectors[r * d + c2];
                    }
                    let want = if c1 == c2 { 1.0 } else { 0.0 };
                    assert_close(dot, want, 1e-10, "orthogonality");
                }
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = sym_eigen(&[1.0, 2.0, 0.0, 1.0], 2).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn solve_psd_recovers_known_solution() {
        // a = [[2,0],[0,4]], b = [2, 8] -> x = [1, 2]
        let sol = solve_psd(&[2.0, 0.0, 0.0, 4.0], &[2.0, 8.0], 2).unwrap();
        assert!(!sol.rank_deficient);
        assert_close(sol.x[0], 1.0, 1e-12, "x0");
        assert_close(sol.x[1], 2.0, 1e-12, "x1");
    }

    #[test]
    fn solve_psd_flags_singular_and_returns_least_norm() {
        // Rank-1 system: a = [[1,1],[1,1]], b = [2,2]. Least-norm x = [1,1].
        let sol = solve_psd(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], 2).unwrap();
        assert!(sol.rank_deficient);
        assert_close(sol.x[0], 1.0, 1e-10, "x0");
        assert_close(sol.x[1], 1.0, 1e-10, "x1");
    }
}
