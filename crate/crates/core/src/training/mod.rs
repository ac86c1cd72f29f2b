//! Fixed training protocol: seeded minibatch SGD with momentum, coupled L2
//! weight decay, cosine annealing with warm restarts, and a full test-split
//! evaluation after every epoch.

mod run_dir;
mod schedule;
mod sgd;

pub use run_dir::{
    load_history, load_predictions, read_manifest, write_baseline_run, write_manifest, write_training_run, PredictionRow, RunConfig,
    RunManifest, CONFIG_FILE, HISTORY_FILE, MANIFEST_FILE, MODEL_FILE, PREDICTIONS_FILE,
};
pub use schedule::{cycles, lr_at, lr_at_progress, restart_epochs, Cycle};
pub use sgd::{sgd_step, sgd_update};

use neurodecode_autodiff::{SeededRng, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::dataset::{EpochSet, Split, Target};
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics, Metrics};
use crate::models::{ForwardCtx, Model};

const DROPOUT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const EVAL_CHUNK: usize = 256;

pub const CROSS_SUBJECT_EPOCHS: usize = 945;
pub const SINGLE_SUBJECT_EPOCHS: usize = 460;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub t0: usize,
    pub t_mult: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub target: Target,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            momentum: 0.9,
            weight_decay: 1e-3,
            t0: 15,
            t_mult: 2,
            lr_max: 0.05,
            lr_min: 1e-6,
            epochs: CROSS_SUBJECT_EPOCHS,
            seed: 0,
            target: Target::Animacy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.t0 == 0 || self.t_mult == 0 {
            return bad("t0 and t_mult must be at least 1");
        }
        if !(self.lr_min < self.lr_max) || self.lr_min < 0.0 {
            return bad("need 0 <= lr_min < lr_max");
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return bad("momentum must lie in [0, 1) and weight_decay be non-negative");
        }
        Ok(())
    }

    pub fn restart_epochs(&self) -> Vec<usize> {
        restart_epochs(self.t0, self.t_mult, self.epochs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Learning rate at the first minibatch of the epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub test_precision: f64,
    pub test_recall: f64,
    pub test_class_precision: Vec<f64>,
    pub test_class_recall: Vec<f64>,
}

impl EpochRecord {
    fn new(epoch: usize, lr: f64, train_loss: f64, train_acc: f64, test: &Metrics) -> Self {
        EpochRecord {
            epoch,
            lr,
            train_loss,
            train_acc,
            test_acc: test.accuracy,
            test_precision: test.precision,
            test_recall: test.recall,
            test_class_precision: test.class_precision.clone(),
            test_class_recall: test.class_recall.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub config: RunConfig,
    pub restart_epochs: Vec<usize>,
    pub records: Vec<EpochRecord>,
}

/// Result of [`train`]: the history and the last epoch's test predictions.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub history: RunHistory,
    pub predictions: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub predictions: Vec<usize>,
    /// Logit margin of the last class over the first; the class-1 score
    /// for binary targets.
    pub scores: Vec<f64>,
}

/// Eval-mode metrics of `model` on all trials of `set`.
pub fn evaluate(model: &Model, set: &EpochSet, target: Target) -> Result<Evaluation> {
    if set.is_empty() {
        return Err(Error::EmptySplit);
    }
    let (labels, n_classes) = set.targets(target);
    let nc = model.spec().n_classes;
    if nc < n_classes {
        return Err(Error::InvalidConfig(format!(
            "model has {nc} outputs but the target has {n_classes} classes"
        )));
    }
    let mut predictions = Vec::with_capacity(set.len());
    let mut scores = Vec::with_capacity(set.len());
    let per = set.trial_len();
    for start in (0..set.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(set.len());
        let logits = model.logits(&set.data[start * per..end * per], end - start)?;
        for row in logits.chunks_exact(nc) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "logits", epoch: 0 });
            }
            predictions.push(argmax(row));
            scores.push((row[nc - 1] - row[0]) as f64);
        }
    }
    let metrics = classification_metrics(&predictions, &labels, nc)?;
    Ok(Evaluation {
        metrics,
        predictions,
        scores,
    })
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains `model` on the train split of `data` and evaluates on the test
/// split after each epoch.
pub fn train(model: &mut Model, data: &EpochSet, cfg: &TrainConfig) -> Result<TrainedRun> {
    train_with(model, data, cfg, |_| {})
}

/// As [`train`], calling `on_epoch` with each record as it is produced.
pub fn train_with<F>(model: &mut Model, data: &EpochSet, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainedRun>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    let train_set = data.subset(&data.indices_of(Split::Train));
    let test_set = data.subset(&data.indices_of(Split::Test));
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::EmptySplit);
    }
    let (train_labels, n_classes) = train_set.targets(cfg.target);
    if model.spec().n_classes < n_classes {
        return Err(Error::InvalidConfig(format!(
            "model has {} outputs but the target has {n_classes} classes",
            model.spec().n_classes
        )));
    }
    let mut history = RunHistory {
        config: RunConfig::trained(model.spec().clone(), cfg.clone()),
        restart_epochs: cfg.restart_epochs(),
        records: Vec::with_capacity(cfg.epochs),
    };
    let mut dropout_rng = SeededRng::with_stream(cfg.seed, DROPOUT_STREAM);
    let mut shuffle_rng = SeededRng::with_stream(cfg.seed, SHUFFLE_STREAM);
    let per = train_set.trial_len();
    let shape = [model.spec().n_channels, model.spec().n_samples];
    let n = train_set.len();
    let n_batches = n.div_ceil(cfg.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut last = None;

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut epoch_lr = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let progress = (epoch - 1) as f64 + b as f64 / n_batches as f64;
            let lr = lr_at_progress(progress, cfg.t0, cfg.t_mult, cfg.lr_max, cfg.lr_min);
            if b == 0 {
                epoch_lr = lr;
            }
            let mut x = Vec::with_capacity(batch.len() * per);
            for &i in batch {
                x.extend_from_slice(train_set.trial(i));
            }
            let labels: Vec<usize> = batch.iter().map(|&i| train_labels[i]).collect();

            let mut tape = Tape::<f32>::new();
            let bound = model.params().bind(&mut tape, true);
            let xv = tape.constant(Tensor::new(&[batch.len(), shape[0], shape[1]], x)?);
            let mut ctx = ForwardCtx::train(model.running_stats(), &mut dropout_rng);
            let logits = model.forward(&mut tape, &bound, xv, &mut ctx)?;
            let batch_stats = std::mem::take(&mut ctx.batch_stats);
            drop(ctx);
            let loss_var = tape.cross_entropy(logits, &labels)?;
            let loss = tape.value(loss_var).data()[0] as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "loss", epoch });
            }
            let nc = tape.shape(logits)[1];
            correct += tape
                .value(logits)
                .data()
                .chunks_exact(nc)
                .zip(&labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            loss_sum += loss * batch.len() as f64;
            let grads = tape.backward(loss_var)?;

            let params = model.params_mut();
            params.zero_grads();
            params.accumulate(&bound, &grads);
            if !sgd_step(params, lr, cfg.momentum, cfg.weight_decay) {
                return Err(Error::NonFinite {
                    what: "parameter update",
                    epoch,
                });
            }
            model.update_running_stats(&batch_stats);
        }
        let eval = evaluate(model, &test_set, cfg.target).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { what, epoch },
            other => other,
        })?;
        let record = EpochRecord::new(epoch, epoch_lr, loss_sum / n as f64, correct as f64 / n as f64, &eval.metrics);
        on_epoch(&record);
        history.records.push(record);
        last = Some(eval);
    }

    let (predictions, scores) = match last {
        Some(e) => (e.predictions, e.scores),
        None => {
            let e = evaluate(model, &test_set, cfg.target)?;
            (e.predictions, e.scores)
        }
    };
    Ok(TrainedRun {
        history,
        predictions,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr_min: 0.1,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_field_names() {
        let json = serde_json::to_value(TrainConfig::default()).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "batch_size",
            "momentum",
            "weight_decay",
            "t0",
            "t_mult",
            "lr_max",
            "lr_min",
            "epochs",
            "seed",
            "target",
        ] {
            assert!(keys.contains(&k), "{k}");
        }
    }
}
