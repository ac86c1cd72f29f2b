//! Run directories: `config.json`, `history.jsonl`, `model.ckpt` (trained
//! models only), `predictions.csv` and `manifest.json`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpochRecord, RunHistory, TrainConfig};
use crate::dataset::TrialMeta;
use crate::error::{Error, Result};
use crate::models::{save_checkpoint, Model, ModelSpec, Size};

pub const CONFIG_FILE: &str = "config.json";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const MODEL_FILE: &str = "model.ckpt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// What produced a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunConfig {
    Trained { spec: ModelSpec, train: TrainConfig },
    CspLda { filter_pairs: usize },
}

impl RunConfig {
    pub fn trained(spec: ModelSpec, train: TrainConfig) -> Self {
        RunConfig::Trained { spec, train }
    }

    /// Architecture name, or `csp_lda`.
    pub fn model_name(&self) -> &'static str {
        match self {
            RunConfig::Trained { spec, .. } => spec.arch.name(),
            RunConfig::CspLda { .. } => "csp_lda",
        }
    }

    pub fn size(&self) -> Option<Size> {
        match self {
            RunConfig::Trained { spec, .. } => Some(spec.size),
            RunConfig::CspLda { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    config: RunConfig,
    restart_epochs: Vec<usize>,
}

/// Provenance of one output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Wall-clock seconds spent fitting, when the command trains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_time_secs: Option<f64>,
}

/// One test trial with its predicted class and score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub trial_id: u64,
    pub subject: u32,
    pub concept_id: u32,
    pub concept_name: String,
    pub category: String,
    pub label: usize,
    pub prediction: usize,
    pub score: f64,
}

impl PredictionRow {
    pub fn meta(&self) -> TrialMeta {
        TrialMeta {
            trial_id: self.trial_id,
            subject: self.subject,
            concept_id: self.concept_id,
            concept_name: self.concept_name.clone(),
            category: self.category.clone(),
            label: self.label.min(1) as u8,
            split: crate::dataset::Split::Test,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_history(dir: &Path, history: &RunHistory) -> Result<()> {
    write_json(
        &dir.join(CONFIG_FILE),
        &ConfigFile {
            config: history.config.clone(),
            restart_epochs: history.restart_epochs.clone(),
        },
    )?;
    let path = dir.join(HISTORY_FILE);
    let mut out = Vec::new();
    for r in &history.records {
        serde_json::to_writer(&mut out, r).expect("serializable");
        out.push(b'\n');
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))
}

fn write_predictions(dir: &Path, meta: &[TrialMeta], labels: &[usize], predictions: &[usize], scores: &[f64]) -> Result<()> {
    if meta.len() != predictions.len() || labels.len() != predictions.len() || scores.len() != predictions.len() {
        return Err(Error::Mismatch(meta.len(), predictions.len()));
    }
    let path = dir.join(PREDICTIONS_FILE);
    let csv_err = |e: csv::Error| Error::Malformed {
        path: path.clone(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    for (i, m) in meta.iter().enumerate() {
        w.serialize(PredictionRow {
            trial_id: m.trial_id,
            subject: m.subject,
            concept_id: m.concept_id,
            concept_name: m.concept_name.clone(),
            category: m.category.clone(),
            label: labels[i],
            prediction: predictions[i],
            score: scores[i],
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Writes a trained model's run directory (everything but the manifest).
pub fn write_training_run(
    dir: &Path,
    history: &RunHistory,
    model: &Model,
    test_meta: &[TrialMeta],
    labels: &[usize],
    predictions: &[usize],
    scores: &[f64],
) -> Result<()> {
    create_dir(dir)?;
    write_history(dir, history)?;
    save_checkpoint(model, &dir.join(MODEL_FILE))?;
    write_predictions(dir, test_meta, labels, predictions, scores)
}

/// Writes a baseline run directory; its history is a single epoch-0 record.
pub fn write_baseline_run(
    dir: &Path,
    history: &RunHistory,
    test_meta: &[TrialMeta],
    labels: &[usize],
    predictions: &[usize],
    scores: &[f64],
) -> Result<()> {
    create_dir(dir)?;
    write_history(dir, history)?;
    write_predictions(dir, test_meta, labels, predictions, scores)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

pub fn load_history(dir: &Path) -> Result<RunHistory> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg: ConfigFile = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: cfg_path.clone(),
        reason: e.to_string(),
    })?;
    let path = dir.join(HISTORY_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: EpochRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.clone(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        records.push(r);
    }
    Ok(RunHistory {
        config: cfg.config,
        restart_epochs: cfg.restart_epochs,
        records,
    })
}

pub fn load_predictions(dir: &Path) -> Result<Vec<PredictionRow>> {
    let path = dir.join(PREDICTIONS_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::Malformed {
            path: path.clone(),
            reason: format!("{other:?}"),
        },
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Malformed {
                path: path.clone(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Reads a manifest, if the directory has one.
pub fn read_manifest(dir: &Path) -> Result<Option<RunManifest>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Malformed {
        path,
        reason: e.to_string(),
    })
}
