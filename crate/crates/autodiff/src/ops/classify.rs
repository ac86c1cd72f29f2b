//! Softmax, softmax cross-entropy and dropout.

use crate::error::{shape_err, AutodiffError, Result};
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

fn softmax_rows<T: Real>(x: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (row, dst) in x.chunks(d).zip(out.chunks_mut(d)) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s = T::zero();
        for (o, &v) in dst.iter_mut().zip(row) {
            *o = (v - m).exp();
            s = s + *o;
        }
        dst.iter_mut().for_each(|o| *o = *o / s);
    }
    out
}

impl<T: Real> Tape<T> {
    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap_or(&0);
        if d == 0 {
            return Err(shape_err("softmax", "non-empty last axis", &shape));
        }
        let out = Tensor::new(&shape, softmax_rows(self.value(x).data(), d))?;
        self.push("softmax", out, &[x], move |args| {
            let (y, g) = (args.output.data(), args.grad);
            let mut gx = vec![T::zero(); g.len()];
            for ((yr, gr), dst) in y.chunks(d).zip(g.chunks(d)).zip(gx.chunks_mut(d)) {
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                for ((o, &yv), &gv) in dst.iter_mut().zip(yr).zip(gr) {
                    *o = yv * (gv - dot);
                }
            }
            vec![Some(gx)]
        })
    }

    /// Mean over the batch of `-log softmax(logits)[label]`; `logits[B, C]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 {
            return Err(shape_err("cross_entropy", format!("[{}, C]", labels.len()), &shape));
        }
        let (nb, nc) = (shape[0], shape[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= nc) {
            return Err(AutodiffError::InvalidArgument {
                op: "cross_entropy",
                reason: format!("label {bad} for {nc} classes"),
            });
        }
        let probs = softmax_rows(self.value(logits).data(), nc);
        let xv = self.value(logits).data();
        let mut loss = T::zero();
        for (b, &l) in labels.iter().enumerate() {
            let row = &xv[b * nc..(b + 1) * nc];
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
            loss = loss + (lse - row[l]);
        }
        let inv_n = T::one() / T::from_usize(nb).unwrap();
        let labels = labels.to_vec();
        self.push("cross_entropy", Tensor::scalar(loss * inv_n), &[logits], move |args| {
            let scale = args.grad[0] * inv_n;
            let mut g = probs;
            for (b, &l) in labels.iter().enumerate() {
                g[b * nc + l] = g[b * nc + l] - T::one();
            }
            g.iter_mut().for_each(|v| *v = *v * scale);
            vec![Some(g)]
        })
    }

    /// Inverted dropout: at train time zero each entry with probability
    /// `rate` and scale survivors by `1 / (1 - rate)`; identity otherwise.
    pub fn dropout(&mut self, x: Var, rate: f64, training: bool, rng: Option<&mut SeededRng>) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(AutodiffError::InvalidArgument {
                op: "dropout",
                reason: format!("rate {rate} outside [0, 1)"),
            });
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let rng = rng.ok_or(AutodiffError::InvalidArgument {
            op: "dropout",
            reason: "training-mode dropout needs a random source".into(),
        })?;
        let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
            .collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
        let out = Tensor::new(xv.shape(), data)?;
        self.push("dropout", out, &[x], move |args| {
            vec![Some(args.grad.iter().zip(&mask).map(|(&g, &m)| g * m).collect())]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let mut tape = Tape::<f64>::new();
        let z = tape.leaf(Tensor::new(&[1, 2], vec![0.0, 0.0]).unwrap());
        let l = tape.cross_entropy(z, &[0]).unwrap();
        assert!((tape.value(l).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::<f32>::new();
        let z = tape.leaf(Tensor::from_fn(&[5, 7], |i| (i as f32 * 0.37).sin() * 30.0));
        let s = tape.softmax(z).unwrap();
        for row in tape.value(s).data().chunks(7) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dropout_eval_is_identity_and_train_scales() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::full(&[1000], 1.0));
        let y = tape.dropout(x, 0.5, false, None).unwrap();
        assert_eq!(y, x);
        let mut rng = SeededRng::new(1);
        let y = tape.dropout(x, 0.25, true, Some(&mut rng)).unwrap();
        let vals = tape.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12));
        let kept = vals.iter().filter(|&&v| v > 0.0).count();
        assert!((700..800).contains(&kept));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let z = tape.leaf(Tensor::zeros(&[1, 2]));
        assert!(tape.cross_entropy(z, &[2]).is_err());
    }
}
