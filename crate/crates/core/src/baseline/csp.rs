//! Common spatial patterns for two classes.
//!
//! The pencil `Σ1 w = λ (Σ0 + Σ1) w` is reduced with the Cholesky factor
//! `Σ0 + Σ1 = L Lᵀ` to the symmetric problem `L⁻¹ Σ1 L⁻ᵀ u = λ u`, solved
//! by Jacobi rotations; the filters are `w = L⁻ᵀ u`.

use nalgebra::{Cholesky, DMatrix};
use neurodecode_autodiff::symmetric_eigen;
use serde::{Deserialize, Serialize};

use crate::dataset::EpochSet;
use crate::error::{Error, Result};

/// Floor on projected variances so a flat projection yields a finite log.
pub const VARIANCE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspModel {
    pub n_channels: usize,
    pub m: usize,
    /// `2m × n_channels` row-major: the `m` filters with the largest
    /// eigenvalues, then the `m` with the smallest.
    pub filters: Vec<f64>,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// All generalized eigenvectors as rows, matching `eigenvalues`.
    pub eigenvectors: Vec<f64>,
}

impl CspModel {
    pub fn filter(&self, j: usize) -> &[f64] {
        &self.filters[j * self.n_channels..(j + 1) * self.n_channels]
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.eigenvectors[k * self.n_channels..(k + 1) * self.n_channels]
    }
}

/// Centered channel covariance of one `channels × samples` trial divided by
/// its trace. A trial with zero trace returns the zero matrix.
pub fn normalized_covariance(trial: &[f32], channels: usize, samples: usize) -> Vec<f64> {
    let centered: Vec<f64> = (0..channels)
        .flat_map(|c| {
            let row = &trial[c * samples..(c + 1) * samples];
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / samples as f64;
            row.iter().map(move |&v| v as f64 - mean)
        })
        .collect();
    let mut cov = vec![0.0; channels * channels];
    for a in 0..channels {
        let ra = &centered[a * samples..(a + 1) * samples];
        for b in a..channels {
            let rb = &centered[b * samples..(b + 1) * samples];
            let v: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            cov[a * channels + b] = v;
            cov[b * channels + a] = v;
        }
    }
    let trace: f64 = (0..channels).map(|c| cov[c * channels + c]).sum();
    if trace > 0.0 {
        cov.iter_mut().for_each(|v| *v /= trace);
    }
    cov
}

/// Per-class mean of trace-normalized trial covariances. `labels` must be
/// 0 or 1 per trial.
pub fn class_covariances(set: &EpochSet, labels: &[usize]) -> Result<[Vec<f64>; 2]> {
    if labels.len() != set.len() {
        return Err(Error::Mismatch(labels.len(), set.len()));
    }
    let n = set.n_channels;
    let mut sums = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut counts = [0usize; 2];
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(Error::InvalidConfig(format!("label {y} is not binary")));
        }
        let cov = normalized_covariance(set.trial(i), n, set.n_samples);
        sums[y].iter_mut().zip(&cov).for_each(|(s, c)| *s += c);
        counts[y] += 1;
    }
    match counts {
        [0, 0] => return Err(Error::EmptySplit),
        [0, _] => return Err(Error::SingleClass(1)),
        [_, 0] => return Err(Error::SingleClass(0)),
        _ => {}
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(sums)
}

fn cholesky(composite: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(composite.clone()) {
        return Ok(c);
    }
    let n = composite.nrows();
    let ridge = 1e-10 * composite.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    Cholesky::new(composite + DMatrix::identity(n, n) * ridge).ok_or(Error::SingularCovariance)
}

/// Solves the CSP pencil for given class covariances (row-major `n × n`).
pub fn csp_from_covariances(sigma0: &[f64], sigma1: &[f64], n: usize, m: usize) -> Result<CspModel> {
    if m == 0 || 2 * m > n {
        return Err(Error::InvalidConfig(format!("{m} filter pairs for {n} channels")));
    }
    let s0 = DMatrix::from_row_slice(n, n, sigma0);
    let s1 = DMatrix::from_row_slice(n, n, sigma1);
    let chol = cholesky(&(&s0 + &s1))?;
    let l = chol.l();
    // L⁻¹ Σ1 L⁻ᵀ = (L⁻¹ (L⁻¹ Σ1)ᵀ) since Σ1 is symmetric.
    let left = l.solve_lower_triangular(&s1).ok_or(Error::SingularCovariance)?;
    let reduced = l.solve_lower_triangular(&left.transpose()).ok_or(Error::SingularCovariance)?;
    let row_major: Vec<f64> = reduced.transpose().iter().copied().collect();
    let eig = symmetric_eigen(&row_major, n)?;

    // w = L⁻ᵀ u, i.e. solve Lᵀ w = u for every eigenvector column.
    let u = DMatrix::from_row_slice(n, n, &eig.vectors).transpose();
    let w = l.transpose().solve_upper_triangular(&u).ok_or(Error::SingularCovariance)?;
    let eigenvectors: Vec<f64> = w.iter().copied().collect();

    let mut filters = Vec::with_capacity(2 * m * n);
    for k in (0..m).chain(n - m..n) {
        filters.extend_from_slice(&eigenvectors[k * n..(k + 1) * n]);
    }
    Ok(CspModel {
        n_channels: n,
        m,
        filters,
        eigenvalues: eig.values,
        eigenvectors,
    })
}

/// Fits CSP on binary-labelled trials.
pub fn fit_csp(set: &EpochSet, labels: &[usize], m: usize) -> Result<CspModel> {
    if m == 0 || 2 * m > set.n_channels {
        return Err(Error::InvalidConfig(format!(
            "{m} filter pairs for {} channels",
            set.n_channels
        )));
    }
    let [s0, s1] = class_covariances(set, labels)?;
    csp_from_covariances(&s0, &s1, set.n_channels, m)
}

/// `ln(var_j / Σ_k var_k)` of the trial projected on each filter.
pub fn csp_features(trial: &[f32], samples: usize, model: &CspModel) -> Vec<f64> {
    let cov = normalized_covariance(trial, model.n_channels, samples);
    let n = model.n_channels;
    let vars: Vec<f64> = (0..2 * model.m)
        .map(|j| {
            let w = model.filter(j);
            let mut q = 0.0;
            for a in 0..n {
                let row = &cov[a * n..(a + 1) * n];
                q += w[a] * row.iter().zip(w).map(|(c, wb)| c * wb).sum::<f64>();
            }
            q.max(VARIANCE_EPS)
        })
        .collect();
    let total: f64 = vars.iter().sum();
    vars.iter().map(|v| (v / total).ln()).collect()
}
