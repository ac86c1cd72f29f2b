//! Convolutional front end followed by a transformer encoder: temporal
//! then full spatial convolution, pooling into tokens, pre-norm encoder
//! layers over the tokens and a two-layer classifier on the flattened
//! sequence.

use neurodecode_autodiff::{Bound, ParamId, Real, Tape, TemporalConv, Var};

use super::transformer::{Attention, FeedForward};
use super::{BatchNormParams, Builder, DenseParams, ForwardCtx, Hyperparams, LayerNormParams, ModelSpec};
use crate::error::Result;

const FFN_EXPANSION: usize = 4;

#[derive(Clone, Debug)]
struct EncoderLayer {
    norm1: LayerNormParams,
    attn: Attention,
    norm2: LayerNormParams,
    ffn: FeedForward,
}

#[derive(Clone, Debug)]
pub(super) struct Conformer {
    kernel: usize,
    pool: usize,
    heads: usize,
    temporal: ParamId,
    spatial: ParamId,
    bn: BatchNormParams,
    embed: DenseParams,
    layers: Vec<EncoderLayer>,
    hidden: DenseParams,
    head: DenseParams,
}

impl Conformer {
    pub(super) fn build(spec: &ModelSpec, b: &mut Builder) -> Self {
        let Hyperparams::Conformer {
            filters,
            kernel,
            pool,
            layers,
            heads,
            head_hidden,
        } = spec.hyperparams
        else {
            unreachable!("conformer built from other hyperparameters")
        };
        let tokens = spec.n_samples / pool;
        let temporal = b.uniform("temporal.weight", &[filters, 1, kernel], kernel);
        let spatial = b.uniform(
            "spatial.weight",
            &[filters, filters, spec.n_channels],
            filters * spec.n_channels,
        );
        let bn = b.batch_norm("bn", filters, true);
        let embed = b.dense("embed", filters, filters);
        let layers = (0..layers)
            .map(|l| EncoderLayer {
                norm1: b.layer_norm(&format!("layer{l}.norm1"), filters),
                attn: Attention::build(b, &format!("layer{l}.attn"), filters),
                norm2: b.layer_norm(&format!("layer{l}.norm2"), filters),
                ffn: FeedForward::build(b, &format!("layer{l}.ffn"), filters, FFN_EXPANSION * filters),
            })
            .collect();
        Conformer {
            kernel,
            pool,
            heads,
            temporal,
            spatial,
            bn,
            embed,
            layers,
            hidden: b.dense("classifier.hidden", tokens * filters, head_hidden),
            head: b.dense("classifier.out", head_hidden, spec.n_classes),
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
        let s = tape.shape(x).to_vec();
        let (nb, nc, ns) = (s[0], s[1], s[2]);
        let h = tape.reshape(x, &[nb, 1, nc, ns])?;
        let h = tape.conv_temporal(h, p[self.temporal], None, TemporalConv::same(self.kernel))?;
        let h = tape.conv_spatial(h, p[self.spatial], None, 1)?;
        let h = ctx.batch_norm(tape, p, h, &self.bn)?;
        let h = tape.elu(h)?;
        let h = tape.avg_pool_time(h, self.pool)?;
        let h = ctx.dropout(tape, h, dropout)?;
        let tokens = tape.transpose_last2(h)?;
        let mut h = self.embed.apply(tape, p, tokens)?;
        for layer in &self.layers {
            let n = layer.norm1.apply(tape, p, h)?;
            let a = layer.attn.apply(tape, p, n, self.heads)?;
            let a = ctx.dropout(tape, a, dropout)?;
            h = tape.add(h, a)?;
            let n = layer.norm2.apply(tape, p, h)?;
            let f = layer.ffn.apply(tape, p, n)?;
            let f = ctx.dropout(tape, f, dropout)?;
            h = tape.add(h, f)?;
        }
        let s = tape.shape(h).to_vec();
        let flat = tape.reshape(h, &[nb, s[1] * s[2]])?;
        let h = self.hidden.apply(tape, p, flat)?;
        let h = tape.elu(h)?;
        let h = ctx.dropout(tape, h, dropout)?;
        self.head.apply(tape, p, h)
    }
}
