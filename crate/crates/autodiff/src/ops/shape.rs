//! Data-movement ops: reshape, transpose, axis reductions, slicing, concat.

use crate::error::{shape_err, AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

/// Splits `shape` around `axis` into (outer, dim, inner) element counts.
fn around_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Real> Tape<T> {
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape)?;
        self.push("reshape", out, &[x], |args| vec![Some(args.grad.to_vec())])
    }

    /// Swaps the last two axes: `[.., a, b] -> [.., b, a]`.
    pub fn transpose_last2(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(shape_err("transpose_last2", "at least 2 axes", &shape));
        }
        let (a, b) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let batch = self.value(x).len() / (a * b).max(1);
        let src = self.value(x).data();
        let mut data = vec![T::zero(); src.len()];
        swap_blocks(src, &mut data, batch, a, b);
        let mut out_shape = shape.clone();
        let n = out_shape.len();
        out_shape.swap(n - 2, n - 1);
        let out = Tensor::new(&out_shape, data)?;
        self.push("transpose_last2", out, &[x], move |args| {
            let mut g = vec![T::zero(); args.grad.len()];
            swap_blocks(args.grad, &mut g, batch, b, a);
            vec![Some(g)]
        })
    }

    /// Mean over one axis, which is removed from the shape.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(shape_err("mean_axis", format!("non-empty axis {axis}"), &shape));
        }
        let (outer, dim, inner) = around_axis(&shape, axis);
        let inv = T::one() / T::from_usize(dim).unwrap();
        let src = self.value(x).data();
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            let dst = &mut data[o * inner..(o + 1) * inner];
            for d in 0..dim {
                let row = &src[(o * dim + d) * inner..(o * dim + d + 1) * inner];
                dst.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
            }
            dst.iter_mut().for_each(|v| *v = *v * inv);
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let out = Tensor::new(&out_shape, data)?;
        self.push("mean_axis", out, &[x], move |args| {
            let mut g = vec![T::zero(); outer * dim * inner];
            for o in 0..outer {
                let src = &args.grad[o * inner..(o + 1) * inner];
                for d in 0..dim {
                    g[(o * dim + d) * inner..(o * dim + d + 1) * inner]
                        .iter_mut()
                        .zip(src)
                        .for_each(|(a, &b)| *a = b * inv);
                }
            }
            vec![Some(g)]
        })
    }

    /// Picks entry `index` along `axis`, dropping that axis.
    pub fn select(&mut self, x: Var, axis: usize, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || index >= shape[axis] {
            return Err(AutodiffError::InvalidArgument {
                op: "select",
                reason: format!("index {index} on axis {axis} of shape {shape:?}"),
            });
        }
        let (outer, dim, inner) = around_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * dim + index) * inner;
            data.extend_from_slice(&src[start..start + inner]);
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let out = Tensor::new(&out_shape, data)?;
        self.push("select", out, &[x], move |args| {
            let mut g = vec![T::zero(); outer * dim * inner];
            for o in 0..outer {
                let start = (o * dim + index) * inner;
                g[start..start + inner].copy_from_slice(&args.grad[o * inner..(o + 1) * inner]);
            }
            vec![Some(g)]
        })
    }

    /// Concatenates along the last axis; all leading axes must agree.
    pub fn concat_last(&mut self, xs: &[Var]) -> Result<Var> {
        let first = self
            .shape(*xs.first().ok_or(AutodiffError::InvalidArgument {
                op: "concat_last",
                reason: "no inputs".into(),
            })?)
            .to_vec();
        let lead = &first[..first.len() - 1];
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.shape(x);
            if s.len() != first.len() || &s[..s.len() - 1] != lead {
                return Err(shape_err("concat_last", format!("leading axes {lead:?}"), s));
            }
            widths.push(s[s.len() - 1]);
        }
        let rows: usize = lead.iter().product();
        let total: usize = widths.iter().sum();
        let mut data = vec![T::zero(); rows * total];
        let mut offset = 0;
        for (&x, &w) in xs.iter().zip(&widths) {
            let src = self.value(x).data();
            for r in 0..rows {
                data[r * total + offset..r * total + offset + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let mut out_shape = lead.to_vec();
        out_shape.push(total);
        let out = Tensor::new(&out_shape, data)?;
        self.push("concat_last", out, xs, move |args| {
            let mut grads = Vec::with_capacity(widths.len());
            let mut offset = 0;
            for (i, &w) in widths.iter().enumerate() {
                if args.needs[i] {
                    let mut g = vec![T::zero(); rows * w];
                    for r in 0..rows {
                        g[r * w..(r + 1) * w]
                            .copy_from_slice(&args.grad[r * total + offset..r * total + offset + w]);
                    }
                    grads.push(Some(g));
                } else {
                    grads.push(None);
                }
                offset += w;
            }
            grads
        })
    }
}

fn swap_blocks<T: Copy>(src: &[T], dst: &mut [T], batch: usize, a: usize, b: usize) {
    for n in 0..batch {
        let s = &src[n * a * b..(n + 1) * a * b];
        let d = &mut dst[n * a * b..(n + 1) * a * b];
        for i in 0..a {
            for j in 0..b {
                d[j * a + i] = s[i * b + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_last2_moves_elements() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_fn(&[2, 2, 3], |i| i as f64));
        let y = tape.transpose_last2(x).unwrap();
        assert_eq!(tape.shape(y), &[2, 3, 2]);
        assert_eq!(tape.value(y).get(&[1, 2, 0]), tape.value(x).get(&[1, 0, 2]));
    }

    #[test]
    fn mean_axis_middle() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_fn(&[2, 3, 2], |i| i as f64));
        let y = tape.mean_axis(x, 1).unwrap();
        assert_eq!(tape.shape(y), &[2, 2]);
        assert_eq!(tape.value(y).data(), &[2.0, 3.0, 8.0, 9.0]);
    }

    #[test]
    fn select_last_step() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::from_fn(&[2, 3, 2], |i| i as f64));
        let y = tape.select(x, 1, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 5.0, 10.0, 11.0]);
        assert!(tape.select(x, 1, 3).is_err());
    }

    #[test]
    fn concat_last_interleaves_rows() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::new(&[2, 1], vec![1.0, 2.0]).unwrap());
        let b = tape.leaf(Tensor::new(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = tape.concat_last(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }
}
