//! Batch and layer normalization.

use crate::error::{shape_err, AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

pub const NORM_EPS: f64 = 1e-5;

/// Statistics source for [`Tape::batch_norm`].
#[derive(Clone, Copy, Debug)]
pub enum BatchNormMode<'a, T> {
    /// Normalize with the current batch's statistics.
    Train,
    /// Normalize with stored running statistics.
    Eval { mean: &'a [T], var: &'a [T] },
}

/// Per-feature statistics of one training batch. `var` is the unbiased
/// estimate, which is what running averages track.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> Tape<T> {
    /// Per-feature normalization of `x[B, F, ..]` over every axis but 1,
    /// followed by the affine map `gamma * x̂ + beta`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BatchNormMode<'_, T>,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let sx = self.shape(x).to_vec();
        if sx.len() < 2 {
            return Err(shape_err("batch_norm", "[B, F, ..]", &sx));
        }
        let (nb, nf) = (sx[0], sx[1]);
        let inner: usize = sx[2..].iter().product();
        if self.shape(gamma) != [nf] || self.shape(beta) != [nf] {
            return Err(shape_err("batch_norm", format!("gamma/beta [{nf}]"), self.shape(gamma)));
        }
        let eps = T::from_f64_lossy(NORM_EPS);
        let count = nb * inner;
        let xv = self.value(x).data();
        let (mean, var_biased, stats) = match mode {
            BatchNormMode::Train => {
                if count < 2 {
                    return Err(AutodiffError::InvalidArgument {
                        op: "batch_norm",
                        reason: "training statistics need at least 2 values per feature".into(),
                    });
                }
                let n = T::from_usize(count).unwrap();
                let mut mean = vec![T::zero(); nf];
                let mut var = vec![T::zero(); nf];
                for (fi, (m, v)) in mean.iter_mut().zip(var.iter_mut()).enumerate() {
                    let mut s = T::zero();
                    for b in 0..nb {
                        let base = (b * nf + fi) * inner;
                        s = s + xv[base..base + inner].iter().copied().sum();
                    }
                    *m = s / n;
                    let mut ss = T::zero();
                    for b in 0..nb {
                        let base = (b * nf + fi) * inner;
                        ss = ss + xv[base..base + inner].iter().map(|&x| (x - *m) * (x - *m)).sum();
                    }
                    *v = ss / n;
                }
                let unbiased = T::from_usize(count).unwrap() / T::from_usize(count - 1).unwrap();
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.iter().map(|&v| v * unbiased).collect(),
                };
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval { mean, var } => {
                if mean.len() != nf || var.len() != nf {
                    return Err(shape_err("batch_norm", format!("running stats [{nf}]"), &[mean.len()]));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var_biased.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![T::zero(); xv.len()];
        let mut y = vec![T::zero(); xv.len()];
        for b in 0..nb {
            for fi in 0..nf {
                let base = (b * nf + fi) * inner;
                for i in base..base + inner {
                    let h = (xv[i] - mean[fi]) * inv_std[fi];
                    xhat[i] = h;
                    y[i] = gv[fi] * h + bv[fi];
                }
            }
        }
        let out = Tensor::new(&sx, y)?;
        let training = matches!(mode, BatchNormMode::Train);
        let var = self.push("batch_norm", out, &[x, gamma, beta], move |args| {
            let (gv, g) = (args.inputs[1].data(), args.grad);
            let mut sum_g = vec![T::zero(); nf];
            let mut sum_gh = vec![T::zero(); nf];
            for b in 0..nb {
                for fi in 0..nf {
                    let base = (b * nf + fi) * inner;
                    for i in base..base + inner {
                        sum_g[fi] = sum_g[fi] + g[i];
                        sum_gh[fi] = sum_gh[fi] + g[i] * xhat[i];
                    }
                }
            }
            let gx = args.needs[0].then(|| {
                let mut gx = vec![T::zero(); g.len()];
                let n = T::from_usize(count).unwrap();
                for b in 0..nb {
                    for fi in 0..nf {
                        let base = (b * nf + fi) * inner;
                        let scale = gv[fi] * inv_std[fi];
                        for i in base..base + inner {
                            gx[i] = if training {
                                scale * (g[i] - sum_g[fi] / n - xhat[i] * sum_gh[fi] / n)
                            } else {
                                scale * g[i]
                            };
                        }
                    }
                }
                gx
            });
            vec![gx, args.needs[1].then_some(sum_gh), args.needs[2].then_some(sum_g)]
        })?;
        Ok((var, stats))
    }

    /// Normalization over the last axis with learned `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let d = *sx.last().unwrap_or(&0);
        if d == 0 || self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err("layer_norm", format!("gamma/beta [{d}]"), self.shape(gamma)));
        }
        let eps = T::from_f64_lossy(NORM_EPS);
        let dn = T::from_usize(d).unwrap();
        let xv = self.value(x).data();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xv.len() / d;
        let mut xhat = vec![T::zero(); xv.len()];
        let mut inv_std = vec![T::zero(); rows];
        let mut y = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let is = T::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                y[r * d + j] = gv[j] * h + bv[j];
            }
        }
        let out = Tensor::new(&sx, y)?;
        self.push("layer_norm", out, &[x, gamma, beta], move |args| {
            let (gv, g) = (args.inputs[1].data(), args.grad);
            let mut gg = vec![T::zero(); d];
            let mut gb = vec![T::zero(); d];
            let mut gx = vec![T::zero(); g.len()];
            for r in 0..rows {
                let (gr, hr) = (&g[r * d..(r + 1) * d], &xhat[r * d..(r + 1) * d]);
                let mut s1 = T::zero();
                let mut s2 = T::zero();
                for j in 0..d {
                    gg[j] = gg[j] + gr[j] * hr[j];
                    gb[j] = gb[j] + gr[j];
                    let dh = gr[j] * gv[j];
                    s1 = s1 + dh;
                    s2 = s2 + dh * hr[j];
                }
                for j in 0..d {
                    let dh = gr[j] * gv[j];
                    gx[r * d + j] = inv_std[r] * (dh - s1 / dn - hr[j] * s2 / dn);
                }
            }
            vec![args.needs[0].then_some(gx), args.needs[1].then_some(gg), args.needs[2].then_some(gb)]
        })
    }
}
