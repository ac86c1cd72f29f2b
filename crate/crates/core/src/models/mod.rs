//! The five decoder families at three sizes each, parameter accounting and
//! checkpoints.
//!
//! Every model maps a batch `[B, 63, 50]` of epochs to `[B, n_classes]`
//! logits using only tape ops, so the same code runs in `f32` for training
//! and in `f64` for gradient checks.

mod checkpoint;
mod conformer;
mod dgcnn;
mod eegnet;
mod lstm;
mod transformer;

use std::fmt;
use std::str::FromStr;

use neurodecode_autodiff::{
    grad_check_cross_entropy, BatchNormMode, BatchStats, Bound, GradCheckConfig, GradCheckReport, ParamId, ParamStore, Real,
    SeededRng, Tape, Tensor, Var,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{N_CHANNELS, N_SAMPLES};

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Running-statistics update rate for batch normalization.
pub const BN_MOMENTUM: f64 = 0.1;

const INIT_STREAM: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Eegnet,
    Lstm,
    Dgcnn,
    Transformer,
    Conformer,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Eegnet, Arch::Lstm, Arch::Dgcnn, Arch::Transformer, Arch::Conformer];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Eegnet => "eegnet",
            Arch::Lstm => "lstm",
            Arch::Dgcnn => "dgcnn",
            Arch::Transformer => "transformer",
            Arch::Conformer => "conformer",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown architecture {s:?} (expected eegnet, lstm, dgcnn, transformer or conformer)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Small,
    Medium,
    Large,
}

impl Size {
    pub const ALL: [Size; 3] = [Size::Small, Size::Medium, Size::Large];

    pub fn name(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Medium => "medium",
            Size::Large => "large",
        }
    }

    pub fn default_dropout(self) -> f64 {
        match self {
            Size::Small => 0.25,
            Size::Medium => 0.5,
            Size::Large => 0.75,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Size::ALL
            .into_iter()
            .find(|z| z.name() == s)
            .ok_or_else(|| format!("unknown size {s:?} (expected small, medium or large)"))
    }
}

/// Architecture-specific widths and depths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyperparams {
    Eegnet {
        f1: usize,
        depth: usize,
        f2: usize,
        kernel: usize,
        separable_kernel: usize,
    },
    Lstm {
        hidden: usize,
        layers: usize,
    },
    Dgcnn {
        order: usize,
        hidden: usize,
        layers: usize,
        node_dense: usize,
    },
    Transformer {
        d_model: usize,
        heads: usize,
        layers: usize,
        ffn: usize,
    },
    Conformer {
        filters: usize,
        kernel: usize,
        pool: usize,
        layers: usize,
        heads: usize,
        head_hidden: usize,
    },
}

impl Hyperparams {
    pub fn default_for(arch: Arch, size: Size) -> Self {
        use Size::*;
        match arch {
            Arch::Eegnet => {
                let (f1, depth, f2) = match size {
                    Small => (8, 2, 16),
                    Medium => (16, 4, 64),
                    Large => (32, 8, 384),
                };
                Hyperparams::Eegnet {
                    f1,
                    depth,
                    f2,
                    kernel: 25,
                    separable_kernel: 16,
                }
            }
            Arch::Lstm => {
                let (hidden, layers) = match size {
                    Small => (10, 2),
                    Medium => (80, 2),
                    Large => (300, 2),
                };
                Hyperparams::Lstm { hidden, layers }
            }
            Arch::Dgcnn => {
                let (order, hidden, layers, node_dense) = match size {
                    Small => (2, 32, 1, 128),
                    Medium => (2, 128, 2, 384),
                    Large => (3, 256, 2, 3072),
                };
                Hyperparams::Dgcnn {
                    order,
                    hidden,
                    layers,
                    node_dense,
                }
            }
            Arch::Transformer => {
                let (d_model, heads, layers, ffn) = match size {
                    Small => (16, 2, 1, 32),
                    Medium => (64, 4, 3, 256),
                    Large => (128, 8, 5, 512),
                };
                Hyperparams::Transformer {
                    d_model,
                    heads,
                    layers,
                    ffn,
                }
            }
            Arch::Conformer => {
                let (filters, layers, heads, head_hidden) = match size {
                    Small => (10, 1, 2, 256),
                    Medium => (40, 2, 4, 64),
                    Large => (40, 6, 8, 2560),
                };
                Hyperparams::Conformer {
                    filters,
                    kernel: 25,
                    pool: 5,
                    layers,
                    heads,
                    head_hidden,
                }
            }
        }
    }

    fn arch(&self) -> Arch {
        match self {
            Hyperparams::Eegnet { .. } => Arch::Eegnet,
            Hyperparams::Lstm { .. } => Arch::Lstm,
            Hyperparams::Dgcnn { .. } => Arch::Dgcnn,
            Hyperparams::Transformer { .. } => Arch::Transformer,
            Hyperparams::Conformer { .. } => Arch::Conformer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub size: Size,
    pub dropout: f64,
    pub hyperparams: Hyperparams,
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
}

impl ModelSpec {
    /// Default tables for a 63 × 50 input and two classes.
    pub fn new(arch: Arch, size: Size) -> Self {
        ModelSpec {
            arch,
            size,
            dropout: size.default_dropout(),
            hyperparams: Hyperparams::default_for(arch, size),
            n_channels: N_CHANNELS,
            n_samples: N_SAMPLES,
            n_classes: 2,
        }
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn with_classes(mut self, n_classes: usize) -> Self {
        self.n_classes = n_classes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if ![0.25, 0.5, 0.75].contains(&self.dropout) {
            return bad(format!("dropout {} is not one of 0.25, 0.5, 0.75", self.dropout));
        }
        if self.hyperparams.arch() != self.arch {
            return bad(format!("{} hyperparameters given for {}", self.hyperparams.arch(), self.arch));
        }
        if self.n_classes < 2 || self.n_channels == 0 || self.n_samples == 0 {
            return bad(format!(
                "need at least 2 classes and a non-empty input, got {} classes over {}x{}",
                self.n_classes, self.n_channels, self.n_samples
            ));
        }
        let zero = match self.hyperparams {
            Hyperparams::Eegnet {
                f1,
                depth,
                f2,
                kernel,
                separable_kernel,
            } => [f1, depth, f2, kernel, separable_kernel].contains(&0),
            Hyperparams::Lstm { hidden, layers } => hidden == 0 || layers == 0,
            Hyperparams::Dgcnn {
                order,
                hidden,
                layers,
                node_dense,
            } => [order, hidden, node_dense].contains(&0) || !(1..=2).contains(&layers),
            Hyperparams::Transformer {
                d_model,
                heads,
                layers,
                ffn,
            } => [d_model, heads, layers, ffn].contains(&0) || d_model % heads != 0,
            Hyperparams::Conformer {
                filters,
                kernel,
                pool,
                layers,
                heads,
                head_hidden,
            } => {
                [filters, kernel, pool, layers, heads, head_hidden].contains(&0)
                    || filters % heads != 0
                    || pool > self.n_samples
            }
        };
        if zero {
            return bad(format!("incomplete or inconsistent hyperparameters {:?}", self.hyperparams));
        }
        if let Hyperparams::Eegnet { .. } = self.hyperparams {
            if self.n_samples < 32 {
                return bad(format!("eegnet pools by 32 and needs at least 32 samples, got {}", self.n_samples));
            }
        }
        Ok(())
    }
}

/// Trainable-parameter counts reported for each architecture and size.
pub fn reference_count(arch: Arch, size: Size) -> usize {
    let row = match arch {
        Arch::Eegnet => [1_888, 11_504, 132_096],
        Arch::Lstm => [3_902, 98_402, 1_161_002],
        Arch::Dgcnn => [12_527, 107_563, 1_049_763],
        Arch::Transformer => [3_090, 141_866, 1_144_834],
        Arch::Conformer => [36_026, 164_906, 1_404_946],
    };
    row[size as usize]
}

/// Relative tolerance of the parameter audit.
pub const BUDGET_TOLERANCE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBudget {
    pub arch: Arch,
    pub size: Size,
    pub target_count: usize,
    pub actual_count: usize,
}

impl ParamBudget {
    /// `(actual − target) / target`.
    pub fn deviation(&self) -> f64 {
        (self.actual_count as f64 - self.target_count as f64) / self.target_count as f64
    }

    pub fn within_budget(&self) -> bool {
        self.deviation().abs() <= BUDGET_TOLERANCE
    }
}

/// Builds all fifteen default models and compares their counts with the
/// reference table.
pub fn audit_params() -> Result<Vec<ParamBudget>> {
    let mut out = Vec::with_capacity(15);
    for arch in Arch::ALL {
        for size in Size::ALL {
            let model = Model::build(&ModelSpec::new(arch, size), 0)?;
            out.push(ParamBudget {
                arch,
                size,
                target_count: reference_count(arch, size),
                actual_count: model.count_params(),
            });
        }
    }
    Ok(out)
}

pub const GRADCHECK_BATCH: usize = 4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Relative error below [`GRADCHECK_TOLERANCE`] on at least one probe.
pub fn gradcheck_passes(report: &GradCheckReport) -> bool {
    report.max_rel_error < GRADCHECK_TOLERANCE && report.probed > 0
}

/// Entries probed per parameter tensor in [`gradient_check`].
pub fn gradcheck_entries(size: Size) -> usize {
    match size {
        Size::Small => 32,
        Size::Medium => 16,
        Size::Large => 8,
    }
}

/// Finite-difference check of a freshly built `spec` on a seeded standard
/// normal batch of [`GRADCHECK_BATCH`] trials with alternating labels.
pub fn gradient_check(spec: &ModelSpec, seed: u64) -> Result<GradCheckReport> {
    let model = Model::build(spec, seed)?;
    let mut rng = SeededRng::with_stream(seed, 1);
    let x: Vec<f64> = (0..GRADCHECK_BATCH * spec.n_channels * spec.n_samples)
        .map(|_| rng.normal())
        .collect();
    let labels: Vec<usize> = (0..GRADCHECK_BATCH).map(|i| (i + i / 2) % 2).collect();
    let cfg = GradCheckConfig {
        max_entries_per_param: Some(gradcheck_entries(spec.size)),
        seed,
        ..GradCheckConfig::default()
    };
    model.grad_check(&x, &labels, &cfg)
}

/// How batch normalization gets its statistics during a pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-pass state: batch-norm mode, stored running statistics, the dropout
/// source (dropout is active iff present) and the batch statistics
/// collected in train mode, one entry per batch-norm layer in order.
pub struct ForwardCtx<'a, T> {
    pub bn: BnMode,
    pub running: &'a [BatchStats<T>],
    pub dropout: Option<&'a mut SeededRng>,
    pub batch_stats: Vec<BatchStats<T>>,
}

impl<'a, T: Real> ForwardCtx<'a, T> {
    pub fn train(running: &'a [BatchStats<T>], dropout: &'a mut SeededRng) -> Self {
        ForwardCtx {
            bn: BnMode::Train,
            running,
            dropout: Some(dropout),
            batch_stats: Vec::new(),
        }
    }

    pub fn eval(running: &'a [BatchStats<T>]) -> Self {
        ForwardCtx {
            bn: BnMode::Eval,
            running,
            dropout: None,
            batch_stats: Vec::new(),
        }
    }

    fn dropout(&mut self, tape: &mut Tape<T>, x: Var, rate: f64) -> Result<Var> {
        let on = self.dropout.is_some();
        Ok(tape.dropout(x, rate, on, self.dropout.as_deref_mut())?)
    }

    fn batch_norm(&mut self, tape: &mut Tape<T>, p: &Bound, x: Var, n: &BatchNormParams) -> Result<Var> {
        let gamma = match n.gamma {
            Some(id) => p[id],
            None => tape.constant(Tensor::full(&[n.features], T::one())),
        };
        let beta = match n.beta {
            Some(id) => p[id],
            None => tape.constant(Tensor::zeros(&[n.features])),
        };
        let mode = match self.bn {
            BnMode::Train => BatchNormMode::Train,
            BnMode::Eval => {
                let running = self.running;
                let s = &running[n.slot];
                BatchNormMode::Eval {
                    mean: &s.mean,
                    var: &s.var,
                }
            }
        };
        let (y, stats) = tape.batch_norm(x, gamma, beta, mode)?;
        if let Some(s) = stats {
            self.batch_stats.push(s);
        }
        Ok(y)
    }
}

#[derive(Clone, Copy, Debug)]
struct BatchNormParams {
    gamma: Option<ParamId>,
    beta: Option<ParamId>,
    features: usize,
    slot: usize,
}

#[derive(Clone, Copy, Debug)]
struct LayerNormParams {
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct DenseParams {
    w: ParamId,
    b: ParamId,
}

impl DenseParams {
    fn apply<T: Real>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        Ok(tape.dense(x, p[self.w], Some(p[self.b]))?)
    }
}

impl LayerNormParams {
    fn apply<T: Real>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        Ok(tape.layer_norm(x, p[self.gamma], p[self.beta])?)
    }
}

/// Registers parameters in order and draws their initial values.
struct Builder {
    store: ParamStore<f32>,
    rng: SeededRng,
    bn_features: Vec<usize>,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder {
            store: ParamStore::new(),
            rng: SeededRng::with_stream(seed, INIT_STREAM),
            bn_features: Vec::new(),
        }
    }

    /// `U(−1/√fan_in, 1/√fan_in)`.
    fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let rng = &mut self.rng;
        let t = Tensor::from_fn(shape, |_| rng.uniform_range(-bound, bound) as f32);
        self.store.add(name, t)
    }

    fn fill(&mut self, name: &str, n: usize, value: f32) -> ParamId {
        self.store.add(name, Tensor::full(&[n], value))
    }

    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize) -> DenseParams {
        DenseParams {
            w: self.uniform(&format!("{name}.weight"), &[fan_in, fan_out], fan_in),
            b: self.uniform(&format!("{name}.bias"), &[fan_out], fan_in),
        }
    }

    /// Batch norm with a learned scale and shift, or neither (`affine = false`).
    fn batch_norm(&mut self, name: &str, features: usize, affine: bool) -> BatchNormParams {
        let gamma = affine.then(|| self.fill(&format!("{name}.gamma"), features, 1.0));
        let beta = affine.then(|| self.fill(&format!("{name}.beta"), features, 0.0));
        self.bn_features.push(features);
        BatchNormParams {
            gamma,
            beta,
            features,
            slot: self.bn_features.len() - 1,
        }
    }

    fn layer_norm(&mut self, name: &str, features: usize) -> LayerNormParams {
        LayerNormParams {
            gamma: self.fill(&format!("{name}.gamma"), features, 1.0),
            beta: self.fill(&format!("{name}.beta"), features, 0.0),
        }
    }
}

#[derive(Clone, Debug)]
enum Net {
    Eegnet(eegnet::EegNet),
    Lstm(lstm::Lstm),
    Dgcnn(dgcnn::Dgcnn),
    Transformer(transformer::Transformer),
    Conformer(conformer::Conformer),
}

/// A built decoder: fixed graph, trainable parameters and batch-norm
/// running statistics.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    net: Net,
    params: ParamStore<f32>,
    running: Vec<BatchStats<f32>>,
}

impl Model {
    /// Builds `spec` with parameters drawn from `seed`.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Model> {
        spec.validate()?;
        let mut b = Builder::new(seed);
        let net = match spec.hyperparams {
            Hyperparams::Eegnet { .. } => Net::Eegnet(eegnet::EegNet::build(spec, &mut b)),
            Hyperparams::Lstm { .. } => Net::Lstm(lstm::Lstm::build(spec, &mut b)),
            Hyperparams::Dgcnn { .. } => Net::Dgcnn(dgcnn::Dgcnn::build(spec, &mut b)),
            Hyperparams::Transformer { .. } => Net::Transformer(transformer::Transformer::build(spec, &mut b)),
            Hyperparams::Conformer { .. } => Net::Conformer(conformer::Conformer::build(spec, &mut b)),
        };
        let running = b
            .bn_features
            .iter()
            .map(|&n| BatchStats {
                mean: vec![0.0; n],
                var: vec![1.0; n],
            })
            .collect();
        Ok(Model {
            spec: spec.clone(),
            net,
            params: b.store,
            running,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[BatchStats<f32>] {
        &self.running
    }

    /// Number of trainable scalars, including adjacency and normalization
    /// affine terms; running statistics are not counted.
    pub fn count_params(&self) -> usize {
        self.params.count()
    }

    /// Logits `[B, n_classes]` for an input `x[B, n_channels, n_samples]`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, ctx: &mut ForwardCtx<'_, T>) -> Result<Var> {
        let s = tape.shape(x);
        if s.len() != 3 || s[1] != self.spec.n_channels || s[2] != self.spec.n_samples {
            return Err(Error::InvalidConfig(format!(
                "model expects [B, {}, {}] input, got {:?}",
                self.spec.n_channels, self.spec.n_samples, s
            )));
        }
        let d = self.spec.dropout;
        match &self.net {
            Net::Eegnet(n) => n.forward(tape, p, x, ctx, d),
            Net::Lstm(n) => n.forward(tape, p, x, ctx, d),
            Net::Dgcnn(n) => n.forward(tape, p, x, ctx, d),
            Net::Transformer(n) => n.forward(tape, p, x, ctx, d),
            Net::Conformer(n) => n.forward(tape, p, x, ctx, d),
        }
    }

    /// Eval-mode logits for `n` trials stored contiguously in `data`.
    pub fn logits(&self, data: &[f32], n: usize) -> Result<Vec<f32>> {
        let shape = [n, self.spec.n_channels, self.spec.n_samples];
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(Tensor::new(&shape, data.to_vec())?);
        let mut ctx = ForwardCtx::eval(&self.running);
        let out = self.forward(&mut tape, &p, x, &mut ctx)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Folds one training batch's statistics into the running averages.
    pub fn update_running_stats(&mut self, batch: &[BatchStats<f32>]) {
        let m = BN_MOMENTUM as f32;
        for (r, b) in self.running.iter_mut().zip(batch) {
            for (x, &y) in r.mean.iter_mut().zip(&b.mean) {
                *x = (1.0 - m) * *x + m * y;
            }
            for (x, &y) in r.var.iter_mut().zip(&b.var) {
                *x = (1.0 - m) * *x + m * y;
            }
        }
    }

    fn set_running_stats(&mut self, running: Vec<BatchStats<f32>>) {
        self.running = running;
    }

    /// Finite-difference check of the cross-entropy gradient in double
    /// precision, with batch-norm in train mode and dropout disabled.
    pub fn grad_check(&self, x: &[f64], labels: &[usize], cfg: &GradCheckConfig) -> Result<GradCheckReport> {
        let shape = [labels.len(), self.spec.n_channels, self.spec.n_samples];
        let input = Tensor::new(&shape, x.to_vec())?;
        let running: Vec<BatchStats<f64>> = self
            .running
            .iter()
            .map(|s| BatchStats {
                mean: s.mean.iter().map(|&v| v as f64).collect(),
                var: s.var.iter().map(|&v| v as f64).collect(),
            })
            .collect();
        let mut store = self.params.cast::<f64>();
        let report = grad_check_cross_entropy(
            &mut store,
            |tape, p| {
                let xv = tape.constant(input.clone());
                let mut ctx = ForwardCtx {
                    bn: BnMode::Train,
                    running: &running,
                    dropout: None,
                    batch_stats: Vec::new(),
                };
                self.forward(tape, p, xv, &mut ctx).map_err(|e| match e {
                    Error::Autodiff(a) => a,
                    other => neurodecode_autodiff::AutodiffError::InvalidArgument {
                        op: "forward",
                        reason: other.to_string(),
                    },
                })
            },
            labels,
            cfg,
        )?;
        Ok(report)
    }
}
