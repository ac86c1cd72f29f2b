//! Encoder-only transformer over time steps: each step's 63-electrode
//! vector is projected to the model width, sinusoidal positions are added,
//! and post-norm encoder layers follow. Steps are mean-pooled.

use neurodecode_autodiff::{sinusoidal_positions, AttentionWeights, Bound, Real, Tape, Var};

use super::{Builder, DenseParams, ForwardCtx, Hyperparams, LayerNormParams, ModelSpec};
use crate::error::Result;

/// Projections of one attention block. The key projection has no bias.
#[derive(Clone, Debug)]
pub(super) struct Attention {
    q: DenseParams,
    k: neurodecode_autodiff::ParamId,
    v: DenseParams,
    o: DenseParams,
}

impl Attention {
    pub(super) fn build(b: &mut Builder, name: &str, d: usize) -> Self {
        Attention {
            q: b.dense(&format!("{name}.q"), d, d),
            k: b.uniform(&format!("{name}.k.weight"), &[d, d], d),
            v: b.dense(&format!("{name}.v"), d, d),
            o: b.dense(&format!("{name}.out"), d, d),
        }
    }

    pub(super) fn apply<T: Real>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, heads: usize) -> Result<Var> {
        let w = AttentionWeights {
            wq: p[self.q.w],
            bq: p[self.q.b],
            wk: p[self.k],
            bk: None,
            wv: p[self.v.w],
            bv: p[self.v.b],
            wo: p[self.o.w],
            bo: p[self.o.b],
        };
        Ok(tape.multi_head_attention(x, &w, heads)?)
    }
}

/// Two-layer position-wise feed-forward block with a ReLU between.
#[derive(Clone, Debug)]
pub(super) struct FeedForward {
    up: DenseParams,
    down: DenseParams,
}

impl FeedForward {
    pub(super) fn build(b: &mut Builder, name: &str, d: usize, hidden: usize) -> Self {
        FeedForward {
            up: b.dense(&format!("{name}.up"), d, hidden),
            down: b.dense(&format!("{name}.down"), hidden, d),
        }
    }

    pub(super) fn apply<T: Real>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let h = self.up.apply(tape, p, x)?;
        let h = tape.relu(h)?;
        self.down.apply(tape, p, h)
    }
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    attn: Attention,
    norm1: LayerNormParams,
    ffn: FeedForward,
    norm2: LayerNormParams,
}

#[derive(Clone, Debug)]
pub(super) struct Transformer {
    heads: usize,
    input: DenseParams,
    layers: Vec<EncoderLayer>,
    head: DenseParams,
}

impl Transformer {
    pub(super) fn build(spec: &ModelSpec, b: &mut Builder) -> Self {
        let Hyperparams::Transformer {
            d_model,
            heads,
            layers,
            ffn,
        } = spec.hyperparams
        else {
            unreachable!("transformer built from other hyperparameters")
        };
        let input = b.dense("input", spec.n_channels, d_model);
        let layers = (0..layers)
            .map(|l| EncoderLayer {
                attn: Attention::build(b, &format!("layer{l}.attn"), d_model),
                norm1: b.layer_norm(&format!("layer{l}.norm1"), d_model),
                ffn: FeedForward::build(b, &format!("layer{l}.ffn"), d_model, ffn),
                norm2: b.layer_norm(&format!("layer{l}.norm2"), d_model),
            })
            .collect();
        Transformer {
            heads,
            input,
            layers,
            head: b.dense("head", d_model, spec.n_classes),
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
        let h = tape.transpose_last2(x)?;
        let h = self.input.apply(tape, p, h)?;
        let s = tape.shape(h).to_vec();
        let pe = tape.constant(sinusoidal_positions(s[1], s[2]));
        let mut h = tape.add_suffix(h, pe)?;
        for layer in &self.layers {
            let a = layer.attn.apply(tape, p, h, self.heads)?;
            let a = ctx.dropout(tape, a, dropout)?;
            let r = tape.add(h, a)?;
            h = layer.norm1.apply(tape, p, r)?;
            let f = layer.ffn.apply(tape, p, h)?;
            let f = ctx.dropout(tape, f, dropout)?;
            let r = tape.add(h, f)?;
            h = layer.norm2.apply(tape, p, r)?;
        }
        let pooled = tape.mean_axis(h, 1)?;
        self.head.apply(tape, p, pooled)
    }
}
