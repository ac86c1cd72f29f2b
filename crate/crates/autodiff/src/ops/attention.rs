//! Multi-head self-attention built from the primitive ops, plus the fixed
//! sinusoidal position table.

use crate::error::{shape_err, AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

/// Projection weights for one attention block; every matrix is `[d, d]`,
/// every bias `[d]`. A key bias shifts all scores of a query row equally
/// and cancels in the softmax, so it is optional.
#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Option<Var>,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

/// `PE[t, 2i] = sin(t / 10000^(2i/d))`, `PE[t, 2i+1] = cos(t / 10000^(2i/d))`.
pub fn sinusoidal_positions<T: Real>(steps: usize, d: usize) -> Tensor<T> {
    Tensor::from_fn(&[steps, d], |idx| {
        let (t, j) = (idx / d, idx % d);
        let pair = (j / 2) as f64;
        let angle = t as f64 / 10000f64.powf(2.0 * pair / d as f64);
        T::from_f64_lossy(if j % 2 == 0 { angle.sin() } else { angle.cos() })
    })
}

impl<T: Real> Tape<T> {
    /// `[B, T, h·dk] -> [B·h, T, dk]`.
    pub fn split_heads(&mut self, x: Var, heads: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || heads == 0 || s[2] % heads != 0 {
            return Err(shape_err("split_heads", format!("[B, T, d] with d divisible by {heads}"), &s));
        }
        let (nb, steps, d) = (s[0], s[1], s[2]);
        let dk = d / heads;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        permute_heads(src, &mut out, nb, steps, heads, dk, false);
        let out = Tensor::new(&[nb * heads, steps, dk], out)?;
        self.push("split_heads", out, &[x], move |args| {
            let mut g = vec![T::zero(); args.grad.len()];
            permute_heads(args.grad, &mut g, nb, steps, heads, dk, true);
            vec![Some(g)]
        })
    }

    /// `[B·h, T, dk] -> [B, T, h·dk]`.
    pub fn merge_heads(&mut self, x: Var, heads: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || heads == 0 || s[0] % heads != 0 {
            return Err(shape_err("merge_heads", format!("[B·{heads}, T, dk]"), &s));
        }
        let (nb, steps, dk) = (s[0] / heads, s[1], s[2]);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        permute_heads(src, &mut out, nb, steps, heads, dk, true);
        let out = Tensor::new(&[nb, steps, heads * dk], out)?;
        self.push("merge_heads", out, &[x], move |args| {
            let mut g = vec![T::zero(); args.grad.len()];
            permute_heads(args.grad, &mut g, nb, steps, heads, dk, false);
            vec![Some(g)]
        })
    }

    /// Scaled dot-product self-attention over `x[B, T, d]` with `heads`
    /// heads of width `d / heads`.
    pub fn multi_head_attention(&mut self, x: Var, w: &AttentionWeights, heads: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(shape_err("multi_head_attention", "[B, T, d]", &s));
        }
        let d = s[2];
        if heads == 0 || d % heads != 0 {
            return Err(AutodiffError::InvalidArgument {
                op: "multi_head_attention",
                reason: format!("model width {d} not divisible into {heads} heads"),
            });
        }
        let q = self.dense(x, w.wq, Some(w.bq))?;
        let k = self.dense(x, w.wk, w.bk)?;
        let v = self.dense(x, w.wv, Some(w.bv))?;
        let q = self.split_heads(q, heads)?;
        let k = self.split_heads(k, heads)?;
        let v = self.split_heads(v, heads)?;
        let scores = self.bmm(q, k, true)?;
        let scale = T::one() / T::from_usize(d / heads).unwrap().sqrt();
        let scores = self.scale(scores, scale)?;
        let attn = self.softmax(scores)?;
        let ctx = self.bmm(attn, v, false)?;
        let ctx = self.merge_heads(ctx, heads)?;
        self.dense(ctx, w.wo, Some(w.bo))
    }
}

/// Moves between `[B, T, h, dk]` (packed) and `[B, h, T, dk]` (split).
/// `inverse = false` packs→split.
fn permute_heads<T: Copy>(src: &[T], dst: &mut [T], nb: usize, steps: usize, heads: usize, dk: usize, inverse: bool) {
    for b in 0..nb {
        for t in 0..steps {
            for hh in 0..heads {
                let packed = ((b * steps + t) * heads + hh) * dk;
                let split = ((b * heads + hh) * steps + t) * dk;
                let (from, to) = if inverse { (split, packed) } else { (packed, split) };
                dst[to..to + dk].copy_from_slice(&src[from..from + dk]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_first_row() {
        let pe = sinusoidal_positions::<f64>(50, 16);
        assert_eq!(pe.shape(), &[50, 16]);
        for j in 0..16 {
            let expected = if j % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(pe.get(&[0, j]), expected);
        }
        assert!((pe.get(&[3, 0]) - 3.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn split_then_merge_is_identity() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_fn(&[2, 5, 6], |i| i as f64));
        let s = tape.split_heads(x, 3).unwrap();
        assert_eq!(tape.shape(s), &[6, 5, 2]);
        let m = tape.merge_heads(s, 3).unwrap();
        assert_eq!(tape.value(m).data(), tape.value(x).data());
    }
}
