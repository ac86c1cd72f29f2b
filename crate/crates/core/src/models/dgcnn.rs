//! Graph network over the electrodes: each node carries its 50-sample
//! trace, a learnable adjacency defines the graph and Chebyshev filters
//! mix neighbouring nodes.

use neurodecode_autodiff::{Bound, ParamId, Real, Tape, Tensor, Var};

use super::{Builder, DenseParams, ForwardCtx, Hyperparams, ModelSpec};
use crate::error::Result;

const ADJ_INIT_LOW: f64 = 0.01;
const ADJ_INIT_HIGH: f64 = 0.05;

#[derive(Clone, Debug)]
struct GraphConv {
    theta: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
pub(super) struct Dgcnn {
    order: usize,
    adjacency: ParamId,
    convs: Vec<GraphConv>,
    node_dense: DenseParams,
    head: DenseParams,
}

impl Dgcnn {
    pub(super) fn build(spec: &ModelSpec, b: &mut Builder) -> Self {
        let Hyperparams::Dgcnn {
            order,
            hidden,
            layers,
            node_dense,
        } = spec.hyperparams
        else {
            unreachable!("dgcnn built from other hyperparameters")
        };
        let n = spec.n_channels;
        let rng = &mut b.rng;
        let adj = Tensor::from_fn(&[n, n], |i| {
            if i / n == i % n {
                0.0
            } else {
                rng.uniform_range(ADJ_INIT_LOW, ADJ_INIT_HIGH) as f32
            }
        });
        let adjacency = b.store.add("adjacency", adj);
        let convs = (0..layers)
            .map(|l| {
                let fin = if l == 0 { spec.n_samples } else { hidden };
                GraphConv {
                    theta: b.uniform(&format!("graph{l}.theta"), &[order * fin, hidden], order * fin),
                    bias: b.uniform(&format!("graph{l}.bias"), &[hidden], order * fin),
                }
            })
            .collect();
        Dgcnn {
            order,
            adjacency,
            convs,
            node_dense: b.dense("node_dense", hidden, node_dense),
            head: b.dense("head", node_dense, spec.n_classes),
        }
    }

    pub(super) fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        x: Var,
        ctx: &mut ForwardCtx<'_, T>,
        dropout: f64,
    ) -> Result<Var> {
        let lap = tape.scaled_laplacian(p[self.adjacency])?;
        let mut h = x;
        for c in &self.convs {
            h = tape.chebyshev_with_laplacian(h, lap, p[c.theta], Some(p[c.bias]), self.order)?;
            h = tape.relu(h)?;
        }
        let h = self.node_dense.apply(tape, p, h)?;
        let h = tape.relu(h)?;
        let h = tape.mean_axis(h, 1)?;
        let h = ctx.dropout(tape, h, dropout)?;
        self.head.apply(tape, p, h)
    }
}
