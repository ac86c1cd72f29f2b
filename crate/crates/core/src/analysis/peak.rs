//! Headline accuracy from a training history: the best test accuracy in
//! the last five epochs before each warm restart.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{EpochRecord, RunHistory};

/// Epochs per cycle that count towards the headline value.
pub const PEAK_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Highest single test accuracy over all windows.
    MaxLast5,
    /// Highest per-window mean test accuracy.
    MeanLast5,
}

impl ExtractionMode {
    pub const ALL: [ExtractionMode; 2] = [ExtractionMode::MaxLast5, ExtractionMode::MeanLast5];

    pub fn name(self) -> &'static str {
        match self {
            ExtractionMode::MaxLast5 => "max_last5",
            ExtractionMode::MeanLast5 => "mean_last5",
        }
    }
}

impl fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ExtractionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExtractionMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown extraction mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMetric {
    pub value: f64,
    /// 0-based index into the history's restart epochs.
    pub cycle_index: usize,
    /// The selected epoch; for `MeanLast5` the last epoch of the window.
    pub epoch: usize,
    pub mode: ExtractionMode,
}

/// Records of the window `[end − 4, end]` for each cycle end, skipping
/// empty windows.
fn windows(history: &RunHistory) -> Vec<(usize, Vec<&EpochRecord>)> {
    history
        .restart_epochs
        .iter()
        .enumerate()
        .filter_map(|(ci, &end)| {
            let lo = end.saturating_sub(PEAK_WINDOW - 1);
            let w: Vec<&EpochRecord> = history
                .records
                .iter()
                .filter(|r| r.epoch >= lo && r.epoch <= end)
                .collect();
            (!w.is_empty()).then_some((ci, w))
        })
        .collect()
}

pub fn peak_metric(history: &RunHistory, mode: ExtractionMode) -> Result<PeakMetric> {
    if history.records.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut best: Option<PeakMetric> = None;
    for (ci, w) in windows(history) {
        let (value, epoch) = match mode {
            ExtractionMode::MaxLast5 => {
                let top = w
                    .iter()
                    .fold(None::<&EpochRecord>, |acc, r| match acc {
                        Some(a) if a.test_acc >= r.test_acc => Some(a),
                        _ => Some(r),
                    })
                    .expect("non-empty window");
                (top.test_acc, top.epoch)
            }
            ExtractionMode::MeanLast5 => {
                let mean = w.iter().map(|r| r.test_acc).sum::<f64>() / w.len() as f64;
                (mean, w.last().expect("non-empty window").epoch)
            }
        };
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(PeakMetric {
                value,
                cycle_index: ci,
                epoch,
                mode,
            });
        }
    }
    best.ok_or(Error::EmptyHistory)
}

/// The record at the selected epoch, for precision and recall.
pub fn record_at(history: &RunHistory, epoch: usize) -> Option<&EpochRecord> {
    history.records.iter().find(|r| r.epoch == epoch)
}
