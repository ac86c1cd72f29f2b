//! Operation tape for reverse-mode differentiation.
//!
//! Every op appends one node holding its forward value, the ids of its
//! inputs and a one-shot backward closure. [`Tape::backward`] walks the
//! nodes in reverse insertion order, so gradient accumulation order is a
//! pure function of the forward program and results are bitwise
//! reproducible.

use crate::error::{AutodiffError, Result};
use crate::tensor::{Real, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What a backward closure sees: the upstream gradient, the forward values
/// of its inputs and output, and which inputs actually want a gradient.
pub struct BackwardArgs<'a, T> {
    pub grad: &'a [T],
    pub inputs: Vec<&'a Tensor<T>>,
    pub output: &'a Tensor<T>,
    pub needs: Vec<bool>,
}

/// Returns one entry per input; `None` for inputs that need no gradient.
pub type BackwardFn<T> = Box<dyn FnOnce(&BackwardArgs<'_, T>) -> Vec<Option<Vec<T>>>>;

struct Node<T> {
    op: &'static str,
    value: Tensor<T>,
    parents: Vec<Var>,
    requires_grad: bool,
    backward: Option<BackwardFn<T>>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    kinks: Option<Vec<bool>>,
    frozen: Option<(Vec<bool>, usize)>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            kinks: None,
            frozen: None,
        }
    }

    /// Starts recording, for every input of a piecewise-linear op (relu),
    /// which side of the kink it lies on.
    pub fn track_kinks(&mut self) {
        self.kinks = Some(Vec::new());
    }

    /// Recorded kink sides in op order, if tracking.
    pub fn kink_sides(&self) -> Option<&[bool]> {
        self.kinks.as_deref()
    }

    pub(crate) fn note_kinks(&mut self, sides: impl Iterator<Item = bool>) {
        if let Some(k) = &mut self.kinks {
            k.extend(sides);
        }
    }

    /// Makes every later piecewise-linear op use the given kink sides (in
    /// the order [`Tape::kink_sides`] recorded them) instead of the signs
    /// of its inputs, so the network becomes smooth around that point.
    pub fn freeze_kinks(&mut self, sides: Vec<bool>) {
        self.frozen = Some((sides, 0));
    }

    /// Sides for the next `n` kinks: frozen if set, else `natural`.
    pub(crate) fn kink_mask(&mut self, natural: Vec<bool>) -> Result<Vec<bool>> {
        let mask = match &mut self.frozen {
            Some((sides, next)) => {
                let end = *next + natural.len();
                let Some(m) = sides.get(*next..end) else {
                    return Err(AutodiffError::InvalidArgument {
                        op: "freeze_kinks",
                        reason: format!("{} frozen sides, need {end}", sides.len()),
                    });
                };
                *next = end;
                m.to_vec()
            }
            None => natural,
        };
        self.note_kinks(mask.iter().copied());
        Ok(mask)
    }

    /// A differentiable input (parameter or probed input).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op: "leaf",
            value,
            parents: Vec::new(),
            requires_grad: true,
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op: "constant",
            value,
            parents: Vec::new(),
            requires_grad: false,
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op
    }

    /// Appends an op result. Rejects non-finite values; drops the closure
    /// when no input needs a gradient.
    pub fn push<F>(&mut self, op: &'static str, value: Tensor<T>, parents: &[Var], backward: F) -> Result<Var>
    where
        F: FnOnce(&BackwardArgs<'_, T>) -> Vec<Option<Vec<T>>> + 'static,
    {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            parents: parents.to_vec(),
            requires_grad,
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Gradient of a scalar `root` with respect to every node.
    pub fn backward(&mut self, root: Var) -> Result<Gradients<T>> {
        let n = self.nodes[root.0].value.len();
        if n != 1 {
            return Err(AutodiffError::InvalidArgument {
                op: "backward",
                reason: format!("root must be a scalar, has {n} elements"),
            });
        }
        self.backward_with(root, vec![T::one()])
    }

    /// Backpropagates an explicit seed gradient from `root`.
    pub fn backward_with(&mut self, root: Var, seed: Vec<T>) -> Result<Gradients<T>> {
        if !self.nodes[root.0].requires_grad {
            return Err(AutodiffError::NoGradient);
        }
        if seed.len() != self.nodes[root.0].value.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "backward",
                expected: format!("{} seed entries", self.nodes[root.0].value.len()),
                got: format!("{}", seed.len()),
            });
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let Some(f) = self.nodes[i].backward.take() else {
                continue;
            };
            let Some(grad) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let args = BackwardArgs {
                grad: &grad,
                inputs: node.parents.iter().map(|p| &self.nodes[p.0].value).collect(),
                output: &node.value,
                needs: node
                    .parents
                    .iter()
                    .map(|p| self.nodes[p.0].requires_grad)
                    .collect(),
            };
            let parent_grads = f(&args);
            for (p, g) in node.parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[p.0].requires_grad {
                    continue;
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(AutodiffError::NonFinite { op: node.op });
                }
                match &mut grads[p.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                    slot @ None => *slot = Some(g),
                }
            }
            // Keep the gradient of leaves only; interior ones are consumed.
            if node.parents.is_empty() {
                grads[i] = Some(grad);
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_do_not_record_backward() {
        let mut tape = Tape::<f64>::new();
        let c = tape.constant(Tensor::scalar(2.0));
        assert!(!tape.requires_grad(c));
        let x = tape.leaf(Tensor::scalar(3.0));
        assert!(tape.requires_grad(x));
        assert!(tape.backward(c).is_err());
    }

    #[test]
    fn non_finite_push_is_an_error() {
        let mut tape = Tape::<f64>::new();
        let err = tape
            .push("probe", Tensor::scalar(f64::NAN), &[], |_| vec![])
            .unwrap_err();
        assert_eq!(err, AutodiffError::NonFinite { op: "probe" });
    }

    #[test]
    fn leaf_gradient_of_itself_is_seed() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let g = tape.backward(x).unwrap();
        assert_eq!(g.get(x), Some(&[1.0][..]));
    }
}
