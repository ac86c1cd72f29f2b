//! Elementwise arithmetic, broadcasting adds and pointwise activations.

use crate::error::{shape_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

fn same_shape<T: Real>(tape: &Tape<T>, op: &'static str, a: Var, b: Var) -> Result<()> {
    if tape.shape(a) != tape.shape(b) {
        return Err(shape_err(op, format!("{:?}", tape.shape(a)), tape.shape(b)));
    }
    Ok(())
}

impl<T: Real> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "add", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(va.shape(), data)?;
        self.push("add", out, &[a, b], |args| {
            let g = args.grad;
            vec![
                args.needs[0].then(|| g.to_vec()),
                args.needs[1].then(|| g.to_vec()),
            ]
        })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "sub", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x - y).collect();
        let out = Tensor::new(va.shape(), data)?;
        self.push("sub", out, &[a, b], |args| {
            let g = args.grad;
            vec![
                args.needs[0].then(|| g.to_vec()),
                args.needs[1].then(|| g.iter().map(|&v| -v).collect()),
            ]
        })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self, "mul", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(va.shape(), data)?;
        self.push("mul", out, &[a, b], |args| {
            let g = args.grad;
            let (x, y) = (args.inputs[0].data(), args.inputs[1].data());
            vec![
                args.needs[0].then(|| g.iter().zip(y).map(|(&g, &y)| g * y).collect()),
                args.needs[1].then(|| g.iter().zip(x).map(|(&g, &x)| g * x).collect()),
            ]
        })
    }

    /// `x * factor` for a constant factor.
    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let out = self.value(x).map(|v| v * factor);
        self.push("scale", out, &[x], move |args| {
            vec![Some(args.grad.iter().map(|&g| g * factor).collect())]
        })
    }

    /// `x + y` where `y`'s shape equals a trailing suffix of `x`'s shape
    /// (bias vectors, positional tables).
    pub fn add_suffix(&mut self, x: Var, y: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ys = self.shape(y).to_vec();
        if ys.len() > xs.len() || xs[xs.len() - ys.len()..] != ys[..] {
            return Err(shape_err("add_suffix", format!("suffix of {xs:?}"), &ys));
        }
        let inner = self.value(y).len();
        let vy = self.value(y).data().to_vec();
        let mut out = self.value(x).clone();
        for chunk in out.data_mut().chunks_mut(inner) {
            chunk.iter_mut().zip(&vy).for_each(|(a, &b)| *a = *a + b);
        }
        self.push("add_suffix", out, &[x, y], move |args| {
            let g = args.grad;
            let gy = args.needs[1].then(|| {
                let mut acc = vec![T::zero(); inner];
                for chunk in g.chunks(inner) {
                    acc.iter_mut().zip(chunk).for_each(|(a, &b)| *a = *a + b);
                }
                acc
            });
            vec![args.needs[0].then(|| g.to_vec()), gy]
        })
    }

    /// `x * s` where `s` is a single-element variable.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(shape_err("mul_scalar", "[1]", self.shape(s)));
        }
        let sv = self.value(s).data()[0];
        let out = self.value(x).map(|v| v * sv);
        self.push("mul_scalar", out, &[x, s], |args| {
            let g = args.grad;
            let x = args.inputs[0].data();
            let s = args.inputs[1].data()[0];
            vec![
                args.needs[0].then(|| g.iter().map(|&g| g * s).collect()),
                args.needs[1].then(|| vec![g.iter().zip(x).map(|(&g, &x)| g * x).sum()]),
            ]
        })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let sides: Vec<bool> = self.value(x).data().iter().map(|&v| v > T::zero()).collect();
        let mask = self.kink_mask(sides)?;
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &on)| if on { v } else { T::zero() })
            .collect();
        let out = Tensor::new(self.value(x).shape(), data)?;
        self.push("relu", out, &[x], move |args| {
            vec![Some(
                args.grad
                    .iter()
                    .zip(&mask)
                    .map(|(&g, &on)| if on { g } else { T::zero() })
                    .collect(),
            )]
        })
    }

    /// Exponential linear unit with `alpha = 1`.
    pub fn elu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| if v > T::zero() { v } else { v.exp_m1() });
        self.push("elu", out, &[x], |args| {
            let x = args.inputs[0].data();
            let y = args.output.data();
            vec![Some(
                args.grad
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(&g, (&x, &y))| if x > T::zero() { g } else { g * (y + T::one()) })
                    .collect(),
            )]
        })
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.tanh());
        self.push("tanh", out, &[x], |args| {
            let y = args.output.data();
            vec![Some(
                args.grad
                    .iter()
                    .zip(y)
                    .map(|(&g, &y)| g * (T::one() - y * y))
                    .collect(),
            )]
        })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum());
        let n = self.value(x).len();
        self.push("sum", out, &[x], move |args| vec![Some(vec![args.grad[0]; n])])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        let inv = T::one() / T::from_usize(n.max(1)).unwrap();
        let out = Tensor::scalar(self.value(x).sum() * inv);
        self.push("mean", out, &[x], move |args| vec![Some(vec![args.grad[0] * inv; n])])
    }

    /// `sum(x * weights)` against a constant weight tensor of the same size.
    /// Turns any op into a scalar for gradient probing.
    pub fn dot_const(&mut self, x: Var, weights: &[T]) -> Result<Var> {
        if weights.len() != self.value(x).len() {
            return Err(shape_err(
                "dot_const",
                format!("{} weights", self.value(x).len()),
                &[weights.len()],
            ));
        }
        let w = weights.to_vec();
        let s = self.value(x).data().iter().zip(&w).map(|(&a, &b)| a * b).sum();
        self.push("dot_const", Tensor::scalar(s), &[x], move |args| {
            let g = args.grad[0];
            vec![Some(w.iter().map(|&w| w * g).collect())]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_suffix_broadcasts_bias() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::new(&[2, 3], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap());
        let b = tape.leaf(Tensor::new(&[3], vec![10.0, 20.0, 30.0]).unwrap());
        let y = tape.add_suffix(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[10.0, 21.0, 32.0, 13.0, 24.0, 35.0]);
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(b).unwrap(), &[2.0, 2.0, 2.0]);
        assert_eq!(g.get(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn add_suffix_rejects_non_suffix() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::zeros(&[2, 3]));
        let b = tape.leaf(Tensor::zeros(&[2]));
        assert!(tape.add_suffix(x, b).is_err());
    }

    #[test]
    fn relu_and_elu_values() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::new(&[3], vec![-1.0, 0.5, 2.0]).unwrap());
        let r = tape.relu(x).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.5, 2.0]);
        let e = tape.elu(x).unwrap();
        assert!((tape.value(e).data()[0] - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(tape.value(e).data()[2], 2.0);
    }

    #[test]
    fn mismatched_add_is_an_error() {
        let mut tape = Tape::<f32>::new();
        let a = tape.leaf(Tensor::zeros(&[2]));
        let b = tape.leaf(Tensor::zeros(&[3]));
        assert!(tape.add(a, b).is_err());
    }
}
