//! Symmetric eigendecomposition by the cyclic Jacobi method.
//!
//! Each sweep visits every off-diagonal pair `(p, q)` in row order and
//! applies the rotation that zeroes `a[p][q]`. Sweeps stop once the
//! off-diagonal Frobenius norm falls below `1e-15` times the full norm, or
//! after [`MAX_SWEEPS`]. The visiting order is fixed, so results are
//! bitwise reproducible.

use crate::error::{AutodiffError, Result};

pub const MAX_SWEEPS: usize = 100;
const REL_TOL: f64 = 1e-15;

/// Eigenvalues sorted descending, with the matching unit eigenvectors
/// stored row-wise in `vectors` (`vectors[k*n..(k+1)*n]` pairs with
/// `values[k]`).
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.values.len();
        &self.vectors[k * n..(k + 1) * n]
    }
}

/// Decomposes the symmetric row-major `n × n` matrix `a`. Only the
/// symmetric part `(a + aᵀ)/2` is used.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(AutodiffError::InvalidArgument {
            op: "symmetric_eigen",
            reason: format!("{} entries for a {n}x{n} matrix", a.len()),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(AutodiffError::NonFinite { op: "symmetric_eigen" });
    }
    let mut m: Vec<f64> = (0..n * n).map(|idx| 0.5 * (a[idx] + a[(idx % n) * n + idx / n])).collect();
    // Columns of `v` accumulate the eigenvectors.
    let mut v: Vec<f64> = (0..n * n).map(|idx| if idx / n == idx % n { 1.0 } else { 0.0 }).collect();
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n * n).filter(|i| i / n != i % n).map(|i| m[i] * m[i]).sum::<f64>().sqrt();
        if off <= REL_TOL * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend((0..n).map(|k| v[k * n + i]));
    }
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_by_hand() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1 with vectors (1, ±1)/√2.
        let e = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let u = e.vector(0);
        assert!((u[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((u[0] - u[1]).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_random_matrix() {
        let n = 9;
        let mut rng = crate::SeededRng::new(5);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let a: Vec<f64> = (0..n * n).map(|i| 0.5 * (raw[i] + raw[(i % n) * n + i / n])).collect();
        let e = symmetric_eigen(&a, n).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| e.values[k] * e.vector(k)[i] * e.vector(k)[j]).sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
                let dot: f64 = (0..n).map(|k| e.vector(i)[k] * e.vector(j)[k]).sum();
                assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_input_is_already_converged() {
        let e = symmetric_eigen(&[1.0, 0.0, 0.0, 4.0], 2).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
    }
}
