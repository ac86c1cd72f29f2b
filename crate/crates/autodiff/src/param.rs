//! Trainable parameters and the store that binds them onto a tape.

use std::ops::Index;

use crate::error::{shape_err, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::{Real, Tensor};

/// A trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Vec<T>,
    pub momentum: Vec<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let n = value.len();
        Parameter {
            name: name.into(),
            value,
            grad: vec![T::zero(); n],
            momentum: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Ordered collection of parameters; order is registration order and fixes
/// the checkpoint layout and the update order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn count(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    /// Registers every parameter on `tape`: as differentiable leaves when
    /// `trainable`, as constants otherwise (inference).
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    tape.leaf(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    /// Adds the gradients of a backward pass into each parameter's accumulator.
    pub fn accumulate(&mut self, bound: &Bound, grads: &Gradients<T>) {
        for (p, &v) in self.params.iter_mut().zip(&bound.vars) {
            if let Some(g) = grads.get(v) {
                p.grad.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(shape_err("set_value", format!("{:?}", p.value.shape()), value.shape()));
        }
        p.value = value;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.value.cast()))
                .collect(),
        }
    }
}

/// Tape handles for every parameter of a store, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_sums_elements() {
        let mut s = ParamStore::<f32>::new();
        s.add("w", Tensor::zeros(&[63, 2]));
        s.add("b", Tensor::zeros(&[2]));
        assert_eq!(s.count(), 128);
    }

    #[test]
    fn accumulate_adds_over_passes() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add("x", Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        for _ in 0..2 {
            let mut tape = Tape::new();
            let b = s.bind(&mut tape, true);
            let y = tape.sum(b[id]).unwrap();
            let g = tape.backward(y).unwrap();
            s.accumulate(&b, &g);
        }
        assert_eq!(s.get(id).grad, vec![2.0, 2.0]);
        s.zero_grads();
        assert_eq!(s.get(id).grad, vec![0.0, 0.0]);
    }
}
