//! Convolutions along the time axis and across the electrode axis, plus
//! temporal average pooling.

use crate::error::{shape_err, AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{matmul_into, Real, Tensor};

/// Geometry of a grouped 1-D convolution over the last axis of `[B, Cin, R, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemporalConv {
    pub groups: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl TemporalConv {
    pub fn valid() -> Self {
        TemporalConv {
            groups: 1,
            pad_left: 0,
            pad_right: 0,
        }
    }

    /// Output length equal to input length for any kernel size.
    pub fn same(kernel: usize) -> Self {
        let total = kernel.saturating_sub(1);
        TemporalConv {
            groups: 1,
            pad_left: total / 2,
            pad_right: total - total / 2,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }
}

/// Output positions `t` for which input index `t + kk - pad_left` is in range.
#[inline]
fn valid_range(kk: usize, pad_left: usize, t_in: usize, t_out: usize) -> (usize, usize) {
    let lo = pad_left.saturating_sub(kk);
    let hi = (t_in + pad_left).saturating_sub(kk).min(t_out);
    (lo, hi.max(lo))
}

impl<T: Real> Tape<T> {
    /// Grouped convolution along time: `x[B, Cin, R, T]`, `w[Cout, Cin/groups, K]`
    /// → `[B, Cout, R, T + pad_left + pad_right - K + 1]`. Each of the `R`
    /// rows (electrodes) is convolved independently with the same kernel.
    pub fn conv_temporal(&mut self, x: Var, w: Var, bias: Option<Var>, geom: TemporalConv) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 4 || sw.len() != 3 {
            return Err(shape_err("conv_temporal", "x [B,Cin,R,T] and w [Cout,Cin/g,K]", &sx));
        }
        let (nb, cin, rows, t_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (cout, cin_g, k) = (sw[0], sw[1], sw[2]);
        let groups = geom.groups;
        if groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g {
            return Err(shape_err(
                "conv_temporal",
                format!("w [_, {}, _] for {cin} inputs in {groups} groups", cin / groups.max(1)),
                &sw,
            ));
        }
        let padded = t_in + geom.pad_left + geom.pad_right;
        if k == 0 || padded < k {
            return Err(AutodiffError::InvalidArgument {
                op: "conv_temporal",
                reason: format!("kernel {k} longer than padded input {padded}"),
            });
        }
        if let Some(b) = bias {
            if self.shape(b) != [cout] {
                return Err(shape_err("conv_temporal", format!("bias [{cout}]"), self.shape(b)));
            }
        }
        let t_out = padded - k + 1;
        let cout_g = cout / groups;
        let pl = geom.pad_left;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut y = vec![T::zero(); nb * cout * rows * t_out];
        for b in 0..nb {
            for co in 0..cout {
                let grp = co / cout_g;
                let out = &mut y[(b * cout + co) * rows * t_out..(b * cout + co + 1) * rows * t_out];
                if let Some(bias) = bias {
                    let bv = self.value(bias).data()[co];
                    out.iter_mut().for_each(|v| *v = bv);
                }
                for cl in 0..cin_g {
                    let ci = grp * cin_g + cl;
                    let kern = &wv[(co * cin_g + cl) * k..(co * cin_g + cl + 1) * k];
                    for r in 0..rows {
                        let xrow = &xv[((b * cin + ci) * rows + r) * t_in..((b * cin + ci) * rows + r + 1) * t_in];
                        let orow = &mut out[r * t_out..(r + 1) * t_out];
                        for (kk, &wk) in kern.iter().enumerate() {
                            let (lo, hi) = valid_range(kk, pl, t_in, t_out);
                            let src = &xrow[lo + kk - pl..hi + kk - pl];
                            orow[lo..hi].iter_mut().zip(src).for_each(|(o, &xi)| *o = *o + wk * xi);
                        }
                    }
                }
            }
        }
        let out = Tensor::new(&[nb, cout, rows, t_out], y)?;
        let mut parents = vec![x, w];
        parents.extend(bias);
        self.push("conv_temporal", out, &parents, move |args| {
            let (xv, wv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let gx = args.needs[0].then(|| {
                let mut gx = vec![T::zero(); nb * cin * rows * t_in];
                for b in 0..nb {
                    for co in 0..cout {
                        let grp = co / cout_g;
                        let gout = &g[(b * cout + co) * rows * t_out..(b * cout + co + 1) * rows * t_out];
                        for cl in 0..cin_g {
                            let ci = grp * cin_g + cl;
                            let kern = &wv[(co * cin_g + cl) * k..(co * cin_g + cl + 1) * k];
                            for r in 0..rows {
                                let base = ((b * cin + ci) * rows + r) * t_in;
                                let dst = &mut gx[base..base + t_in];
                                let grow = &gout[r * t_out..(r + 1) * t_out];
                                for (kk, &wk) in kern.iter().enumerate() {
                                    let (lo, hi) = valid_range(kk, pl, t_in, t_out);
                                    dst[lo + kk - pl..hi + kk - pl]
                                        .iter_mut()
                                        .zip(&grow[lo..hi])
                                        .for_each(|(d, &gg)| *d = *d + wk * gg);
                                }
                            }
                        }
                    }
                }
                gx
            });
            let gw = args.needs[1].then(|| {
                let mut gw = vec![T::zero(); cout * cin_g * k];
                for co in 0..cout {
                    let grp = co / cout_g;
                    for cl in 0..cin_g {
                        let ci = grp * cin_g + cl;
                        let dst = &mut gw[(co * cin_g + cl) * k..(co * cin_g + cl + 1) * k];
                        for b in 0..nb {
                            let gout = &g[(b * cout + co) * rows * t_out..(b * cout + co + 1) * rows * t_out];
                            for r in 0..rows {
                                let base = ((b * cin + ci) * rows + r) * t_in;
                                let xrow = &xv[base..base + t_in];
                                let grow = &gout[r * t_out..(r + 1) * t_out];
                                for (kk, d) in dst.iter_mut().enumerate() {
                                    let (lo, hi) = valid_range(kk, pl, t_in, t_out);
                                    let s: T = grow[lo..hi]
                                        .iter()
                                        .zip(&xrow[lo + kk - pl..hi + kk - pl])
                                        .map(|(&a, &b)| a * b)
                                        .sum();
                                    *d = *d + s;
                                }
                            }
                        }
                    }
                }
                gw
            });
            let mut grads = vec![gx, gw];
            if args.needs.len() == 3 {
                grads.push(args.needs[2].then(|| {
                    let mut gb = vec![T::zero(); cout];
                    for b in 0..nb {
                        for (co, d) in gb.iter_mut().enumerate() {
                            let s: T = g[(b * cout + co) * rows * t_out..(b * cout + co + 1) * rows * t_out]
                                .iter()
                                .copied()
                                .sum();
                            *d = *d + s;
                        }
                    }
                    gb
                }));
            }
            grads
        })
    }

    /// Convolution whose kernel spans the whole electrode axis:
    /// `x[B, F, C, T]`, `w[G, F/groups, C]` → `[B, G, T]`.
    /// `groups = F` with `G = F·D` is the depthwise spatial filter with depth
    /// multiplier `D`; `C = 1` gives a pointwise (1×1) channel mix.
    pub fn conv_spatial(&mut self, x: Var, w: Var, bias: Option<Var>, groups: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 4 || sw.len() != 3 || sw[2] != sx[2] {
            return Err(shape_err("conv_spatial", "x [B,F,C,T] and w [G,F/groups,C]", &sw));
        }
        let (nb, f, c, t) = (sx[0], sx[1], sx[2], sx[3]);
        let gout = sw[0];
        if groups == 0 || f % groups != 0 || gout % groups != 0 || sw[1] != f / groups {
            return Err(shape_err(
                "conv_spatial",
                format!("w [_, {}, {c}] for {f} maps in {groups} groups", f / groups.max(1)),
                &sw,
            ));
        }
        if let Some(b) = bias {
            if self.shape(b) != [gout] {
                return Err(shape_err("conv_spatial", format!("bias [{gout}]"), self.shape(b)));
            }
        }
        let fpg = f / groups;
        let gpg = gout / groups;
        let kdim = fpg * c;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut y = vec![T::zero(); nb * gout * t];
        for b in 0..nb {
            for grp in 0..groups {
                let wblk = &wv[grp * gpg * kdim..(grp + 1) * gpg * kdim];
                let xblk = &xv[(b * f + grp * fpg) * c * t..(b * f + (grp + 1) * fpg) * c * t];
                let yblk = &mut y[(b * gout + grp * gpg) * t..(b * gout + (grp + 1) * gpg) * t];
                matmul_into(gpg, kdim, t, wblk, false, xblk, false, yblk, false);
            }
        }
        if let Some(bias) = bias {
            let bv = self.value(bias).data();
            for (i, row) in y.chunks_mut(t).enumerate() {
                let bb = bv[i % gout];
                row.iter_mut().for_each(|v| *v = *v + bb);
            }
        }
        let out = Tensor::new(&[nb, gout, t], y)?;
        let mut parents = vec![x, w];
        parents.extend(bias);
        self.push("conv_spatial", out, &parents, move |args| {
            let (xv, wv, g) = (args.inputs[0].data(), args.inputs[1].data(), args.grad);
            let gx = args.needs[0].then(|| {
                let mut gx = vec![T::zero(); nb * f * c * t];
                for b in 0..nb {
                    for grp in 0..groups {
                        let wblk = &wv[grp * gpg * kdim..(grp + 1) * gpg * kdim];
                        let gblk = &g[(b * gout + grp * gpg) * t..(b * gout + (grp + 1) * gpg) * t];
                        let dst = &mut gx[(b * f + grp * fpg) * c * t..(b * f + (grp + 1) * fpg) * c * t];
                        matmul_into(kdim, gpg, t, wblk, true, gblk, false, dst, false);
                    }
                }
                gx
            });
            let gw = args.needs[1].then(|| {
                let mut gw = vec![T::zero(); gout * kdim];
                for b in 0..nb {
                    for grp in 0..groups {
                        let xblk = &xv[(b * f + grp * fpg) * c * t..(b * f + (grp + 1) * fpg) * c * t];
                        let gblk = &g[(b * gout + grp * gpg) * t..(b * gout + (grp + 1) * gpg) * t];
                        let dst = &mut gw[grp * gpg * kdim..(grp + 1) * gpg * kdim];
                        matmul_into(gpg, t, kdim, gblk, false, xblk, true, dst, true);
                    }
                }
                gw
            });
            let mut grads = vec![gx, gw];
            if args.needs.len() == 3 {
                grads.push(args.needs[2].then(|| {
                    let mut gb = vec![T::zero(); gout];
                    for (i, row) in g.chunks(t).enumerate() {
                        let s: T = row.iter().copied().sum();
                        gb[i % gout] = gb[i % gout] + s;
                    }
                    gb
                }));
            }
            grads
        })
    }

    /// Non-overlapping average pooling over the last axis; a trailing
    /// remainder shorter than `k` is dropped.
    pub fn avg_pool_time(&mut self, x: Var, k: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let t_in = *sx.last().unwrap_or(&0);
        if k == 0 || k > t_in {
            return Err(AutodiffError::InvalidArgument {
                op: "avg_pool_time",
                reason: format!("window {k} for length {t_in}"),
            });
        }
        let t_out = t_in / k;
        let rows = self.value(x).len() / t_in;
        let inv = T::one() / T::from_usize(k).unwrap();
        let xv = self.value(x).data();
        let mut y = vec![T::zero(); rows * t_out];
        for r in 0..rows {
            for j in 0..t_out {
                let s: T = xv[r * t_in + j * k..r * t_in + (j + 1) * k].iter().copied().sum();
                y[r * t_out + j] = s * inv;
            }
        }
        let mut shape = sx.clone();
        *shape.last_mut().unwrap() = t_out;
        let out = Tensor::new(&shape, y)?;
        self.push("avg_pool_time", out, &[x], move |args| {
            let mut gx = vec![T::zero(); rows * t_in];
            for r in 0..rows {
                for j in 0..t_out {
                    let gv = args.grad[r * t_out + j] * inv;
                    gx[r * t_in + j * k..r * t_in + (j + 1) * k].iter_mut().for_each(|v| *v = gv);
                }
            }
            vec![Some(gx)]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_keeps_length() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn(&[1, 1, 2, 10], |i| i as f64));
        let w = tape.leaf(Tensor::full(&[3, 1, 4], 1.0));
        let y = tape.conv_temporal(x, w, None, TemporalConv::same(4)).unwrap();
        assert_eq!(tape.shape(y), &[1, 3, 2, 10]);
        // pad_left = 1: y[t] = x[t-1] + x[t] + x[t+1] + x[t+2]
        assert_eq!(tape.value(y).get(&[0, 0, 0, 0]), 0.0 + 1.0 + 2.0);
        assert_eq!(tape.value(y).get(&[0, 2, 1, 5]), 14.0 + 15.0 + 16.0 + 17.0);
    }

    #[test]
    fn conv_spatial_depthwise_sums_over_electrodes() {
        let mut tape = Tape::<f64>::new();
        // B=1, F=2, C=3, T=2
        let x = tape.constant(Tensor::from_fn(&[1, 2, 3, 2], |i| i as f64));
        // depth multiplier 2 → G = 4, each kernel all-ones over 3 electrodes
        let w = tape.leaf(Tensor::full(&[4, 1, 3], 1.0));
        let y = tape.conv_spatial(x, w, None, 2).unwrap();
        assert_eq!(tape.shape(y), &[1, 4, 2]);
        assert_eq!(tape.value(y).data(), &[6.0, 9.0, 6.0, 9.0, 24.0, 27.0, 24.0, 27.0]);
    }

    #[test]
    fn avg_pool_drops_remainder() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_fn(&[1, 10], |i| i as f64));
        let y = tape.avg_pool_time(x, 4).unwrap();
        assert_eq!(tape.value(y).data(), &[1.5, 5.5]);
    }

    #[test]
    fn group_mismatch_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[1, 3, 1, 8]));
        let w = tape.leaf(Tensor::zeros(&[4, 1, 3]));
        assert!(tape.conv_temporal(x, w, None, TemporalConv::valid().with_groups(2)).is_err());
    }
}
