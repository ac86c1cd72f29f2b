//! Stacked LSTM over the 50 time steps, each step a 63-electrode vector;
//! the last hidden state of the top layer feeds the classifier.

use neurodecode_autodiff::{Bound, ParamId, Real, Tape, Var};

use super::{Builder, DenseParams, ForwardCtx, Hyperparams, ModelSpec};
use crate::error::Result;

#[derive(Clone, Debug)]
struct LstmLayer {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
pub(super) struct Lstm {
    layers: Vec<LstmLayer>,
    head: DenseParams,
}

impl Lstm {
    pub(super) fn build(spec: &ModelSpec, b: &mut Builder) -> Self {
        let Hyperparams::Lstm { hidden, layers } = spec.hyperparams else {
            unreachable!("lstm built from other hyperparameters")
        };
        let layers = (0..layers)
            .map(|l| {
                let input = if l == 0 { spec.n_channels } else { hidden };
                LstmLayer {
                    w_ih: b.uniform(&format!("lstm{l}.w_ih"), &[input, 4 * hidden], hidden),
                    w_hh: b.uniform(&format!("lstm{l}.w_hh"), &[hidden, 4 * hidden], hidden),
                    bias: b.uniform(&format!("lstm{l}.bias"), &[4 * hidden], hidden),
                }
            })
            .collect();
        Lstm {
            layers,
            head: b.dense("head", hidden, spec.n_classes),
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
        let mut h = tape.transpose_last2(x)?;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                h = ctx.dropout(tape, h, dropout)?;
            }
            h = tape.lstm_layer(h, p[layer.w_ih], p[layer.w_hh], p[layer.bias])?;
        }
        let steps = tape.shape(h)[1];
        let last = tape.select(h, 1, steps - 1)?;
        let last = ctx.dropout(tape, last, dropout)?;
        self.head.apply(tape, p, last)
    }
}
