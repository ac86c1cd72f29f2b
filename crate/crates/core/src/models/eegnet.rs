//! Compact convolutional network: temporal filters, a depthwise spatial
//! filter per temporal filter, then a depthwise-separable temporal block.
//!
//! The convolutions carry no bias because each feeds a batch norm that
//! removes per-channel offsets. The first batch norm has no affine terms
//! for the same reason: each depthwise spatial filter sees a single
//! temporal filter, so a per-filter scale or shift there is undone by the
//! second batch norm.

use neurodecode_autodiff::{Bound, ParamId, Real, Tape, TemporalConv, Var};

use super::{BatchNormParams, Builder, DenseParams, ForwardCtx, Hyperparams, ModelSpec};
use crate::error::Result;

const POOL_1: usize = 4;
const POOL_2: usize = 8;

#[derive(Clone, Debug)]
pub(super) struct EegNet {
    f1: usize,
    depth: usize,
    f2: usize,
    kernel: usize,
    separable_kernel: usize,
    temporal: ParamId,
    bn1: BatchNormParams,
    spatial: ParamId,
    bn2: BatchNormParams,
    depthwise: ParamId,
    pointwise: ParamId,
    bn3: BatchNormParams,
    head: DenseParams,
}

impl EegNet {
    pub(super) fn build(spec: &ModelSpec, b: &mut Builder) -> Self {
        let Hyperparams::Eegnet {
            f1,
            depth,
            f2,
            kernel,
            separable_kernel,
        } = spec.hyperparams
        else {
            unreachable!("eegnet built from other hyperparameters")
        };
        let fd = f1 * depth;
        let pooled = spec.n_samples / POOL_1 / POOL_2;
        EegNet {
            f1,
            depth,
            f2,
            kernel,
            separable_kernel,
            temporal: b.uniform("temporal.weight", &[f1, 1, kernel], kernel),
            bn1: b.batch_norm("bn1", f1, false),
            spatial: b.uniform("spatial.weight", &[fd, 1, spec.n_channels], spec.n_channels),
            bn2: b.batch_norm("bn2", fd, true),
            depthwise: b.uniform("separable.depthwise", &[fd, 1, separable_kernel], separable_kernel),
            pointwise: b.uniform("separable.pointwise", &[f2, fd, 1], fd),
            bn3: b.batch_norm("bn3", f2, true),
            head: b.dense("head", f2 * pooled, spec.n_classes),
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
        let fd = self.f1 * self.depth;
        let h = tape.reshape(x, &[nb, 1, nc, ns])?;
        let h = tape.conv_temporal(h, p[self.temporal], None, TemporalConv::same(self.kernel))?;
        let h = ctx.batch_norm(tape, p, h, &self.bn1)?;
        let h = tape.conv_spatial(h, p[self.spatial], None, self.f1)?;
        let h = ctx.batch_norm(tape, p, h, &self.bn2)?;
        let h = tape.elu(h)?;
        let h = tape.avg_pool_time(h, POOL_1)?;
        let h = ctx.dropout(tape, h, dropout)?;

        let t = tape.shape(h)[2];
        let h = tape.reshape(h, &[nb, fd, 1, t])?;
        let geom = TemporalConv::same(self.separable_kernel).with_groups(fd);
        let h = tape.conv_temporal(h, p[self.depthwise], None, geom)?;
        let h = tape.conv_temporal(h, p[self.pointwise], None, TemporalConv::valid())?;
        let h = ctx.batch_norm(tape, p, h, &self.bn3)?;
        let h = tape.elu(h)?;
        let h = tape.reshape(h, &[nb, self.f2, t])?;
        let h = tape.avg_pool_time(h, POOL_2)?;
        let h = ctx.dropout(tape, h, dropout)?;
        let t = tape.shape(h)[2];
        let h = tape.reshape(h, &[nb, self.f2 * t])?;
        self.head.apply(tape, p, h)
    }
}
