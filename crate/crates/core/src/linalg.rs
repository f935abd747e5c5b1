//! Small dense symmetric eigensolver (cyclic Jacobi).

use crate::error::{Error, Result};
use crate::Real;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub eigenvalues: Vec<T>,
    /// Column `j` (stored at `vectors[k * n + j]` for row `k`) pairs with `eigenvalues[j]`.
    pub vectors: Vec<T>,
    pub n: usize,
}

impl<T: Real> SymmetricEigen<T> {
    #[inline]
    pub fn vector_entry(&self, row: usize, col: usize) -> T {
        self.vectors[row * self.n + col]
    }
}

/// Decomposes the row-major symmetric matrix `a` (`n x n`).
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::epsilon() * frob * T::lit(n as f64);
    let half = T::lit(0.5);

    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            return Ok(SymmetricEigen {
                eigenvalues: (0..n).map(|i| m[i * n + i]).collect(),
                vectors: v,
                n,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Below rounding level of its diagonal pair: rotating would only churn.
                if apq.abs() <= T::epsilon() * half * (app.abs() + aqq.abs()) {
                    m[p * n + q] = T::zero();
                    m[q * n + p] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_matrix() {
        let n = 4;
        let a = [
            4.0, 1.0, -2.0, 0.5, //
            1.0, 3.0, 0.0, 1.5, //
            -2.0, 0.0, 1.0, -1.0, //
            0.5, 1.5, -1.0, 2.0,
        ];
        let e = symmetric_eigen(&a, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n)
                    .map(|k| e.vector_entry(i, k) * e.eigenvalues[k] * e.vector_entry(j, k))
                    .sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
            }
        }
        let trace: f64 = e.eigenvalues.iter().sum();
        assert!((trace - 10.0).abs() < 1e-12);
    }

    #[test]
    fn random_adjacency_matrices_converge() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..2000 {
            let n = rng.gen_range(2..=19);
            let p: f64 = rng.gen_range(0.0..1.0);
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(p) {
                        a[i * n + j] = 1.0;
                        a[j * n + i] = 1.0;
                    }
                }
            }
            let e = symmetric_eigen(&a, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let r: f64 = (0..n)
                        .map(|k| e.vector_entry(i, k) * e.eigenvalues[k] * e.vector_entry(j, k))
                        .sum();
                    assert!((r - a[i * n + j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_matrix() {
        let e = symmetric_eigen(&[0.0f64; 9], 3).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }
}
