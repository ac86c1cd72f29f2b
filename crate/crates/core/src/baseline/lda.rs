//! Two-class linear discriminant with a shrunk pooled covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shrinkage added to the pooled covariance diagonal, relative to its mean
/// diagonal entry.
pub const SHRINKAGE_EPS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weight: Vec<f64>,
    pub bias: f64,
    pub class_means: [Vec<f64>; 2],
    /// Regularized pooled covariance, row-major.
    pub shared_covariance: Vec<f64>,
    /// Fewer pooled degrees of freedom than features; the fit relies on
    /// the shrinkage alone.
    pub underdetermined: bool,
}

impl LdaModel {
    /// `wᵀx + b`; positive scores favour class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weight.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let s = self.score(x);
        (usize::from(s > 0.0), s)
    }
}

/// Fits the discriminant on `features` (one row per sample) with binary
/// `labels`.
pub fn fit_lda(features: &[Vec<f64>], labels: &[usize], shrinkage_eps: f64) -> Result<LdaModel> {
    if features.len() != labels.len() {
        return Err(Error::Mismatch(features.len(), labels.len()));
    }
    let d = features.first().ok_or(Error::EmptySplit)?.len();
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (x, &y) in features.iter().zip(labels) {
        if y > 1 {
            return Err(Error::InvalidConfig(format!("label {y} is not binary")));
        }
        if x.len() != d {
            return Err(Error::Mismatch(x.len(), d));
        }
        means[y].iter_mut().zip(x).for_each(|(m, v)| *m += v);
        counts[y] += 1;
    }
    if counts[0] == 0 {
        return Err(Error::SingleClass(1));
    }
    if counts[1] == 0 {
        return Err(Error::SingleClass(0));
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }

    let n = features.len();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (x, &y) in features.iter().zip(labels) {
        let r = DVector::from_iterator(d, x.iter().zip(&means[y]).map(|(v, m)| v - m));
        cov += &r * r.transpose();
    }
    cov /= n.saturating_sub(2).max(1) as f64;
    let mean_diag = cov.trace() / d as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for i in 0..d {
        cov[(i, i)] += shrinkage_eps * scale;
    }

    let diff = DVector::from_iterator(d, means[1].iter().zip(&means[0]).map(|(a, b)| a - b));
    let weight = cov.clone().cholesky().ok_or(Error::SingularCovariance)?.solve(&diff);
    let weight: Vec<f64> = weight.iter().copied().collect();
    let project = |m: &[f64]| weight.iter().zip(m).map(|(w, v)| w * v).sum::<f64>();
    let bias = -0.5 * (project(&means[0]) + project(&means[1]));
    Ok(LdaModel {
        weight,
        bias,
        class_means: means,
        shared_covariance: cov.transpose().iter().copied().collect(),
        underdetermined: n < d + 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_boundary_at_midpoint() {
        let model = fit_lda(&[vec![0.0], vec![1.0]], &[0, 1], SHRINKAGE_EPS).unwrap();
        assert!(model.weight[0] > 0.0);
        assert!((-model.bias / model.weight[0] - 0.5).abs() < 1e-12);
        assert_eq!(model.predict(&[0.2]).0, 0);
        assert_eq!(model.predict(&[0.8]).0, 1);
        assert!(model.underdetermined);
    }

    #[test]
    fn separated_blobs() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let jitter = (i as f64 * 0.37).sin() * 0.3;
            x.push(vec![-2.0 + jitter, 1.0 - jitter]);
            y.push(0);
            x.push(vec![2.0 - jitter, -1.0 + jitter * 0.5]);
            y.push(1);
        }
        let model = fit_lda(&x, &y, SHRINKAGE_EPS).unwrap();
        assert!(x.iter().zip(&y).all(|(v, &l)| model.predict(v).0 == l));
        assert!(!model.underdetermined);
    }

    #[test]
    fn equal_means_give_zero_weight() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let model = fit_lda(&x, &[0, 0, 1, 1], SHRINKAGE_EPS).unwrap();
        assert!(model.weight.iter().all(|w| *w == 0.0));
        assert_eq!(model.bias, 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(fit_lda(&x, &[1, 1], SHRINKAGE_EPS), Err(Error::SingleClass(1))));
    }
}
