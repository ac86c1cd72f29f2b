//! Trial metadata, the binary animacy task, splits, the epoch container
//! format and the synthetic generator.

mod categories;
mod io;
mod synth;
mod task;

use serde::{Deserialize, Serialize};

pub use categories::{category_to_label, concept_table, full_scale_meta, CategoryInfo, Concept, CATEGORIES, N_CONCEPTS, N_SUBJECTS, REPETITIONS};
pub use io::{
    parse_container,
    load_epochs, load_raw, save_epochs, save_raw, ContainerHeader, RawEvent, RawHeader, CONTAINER_MAGIC, CONTAINER_VERSION,
    DTYPE_F32,
};
pub use synth::{
    generate_raw, generate_synthetic, erp_waveform, SynthConfig, SynthMode, PINK_STD, RAW_CHANNELS, RAW_RATE,
};
pub use task::{build_task, split, split_assignment, task_indices, Task};

use crate::error::{Error, Result};
use crate::signal::{N_CHANNELS, N_SAMPLES};

/// Binary animacy label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Nonliving = 0,
    Alive = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Alive => "alive",
            Label::Nonliving => "non-living",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: u64,
    pub subject: u32,
    pub concept_id: u32,
    pub concept_name: String,
    pub category: String,
    /// 1 = alive, 0 = non-living.
    pub label: u8,
    #[serde(default)]
    pub split: Split,
}

/// What a classifier is asked to predict from a trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Animacy,
    /// Subject identity; classes are subjects in ascending id order.
    Subject,
}

/// `n_trials × n_channels × n_samples` single-precision epochs with
/// per-trial metadata in the same order.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochSet {
    pub n_channels: usize,
    pub n_samples: usize,
    pub data: Vec<f32>,
    pub meta: Vec<TrialMeta>,
}

impl EpochSet {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f32>, meta: Vec<TrialMeta>) -> Result<Self> {
        let set = EpochSet {
            n_channels,
            n_samples,
            data,
            meta,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn empty() -> Self {
        EpochSet {
            n_channels: N_CHANNELS,
            n_samples: N_SAMPLES,
            data: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn trial_len(&self) -> usize {
        self.n_channels * self.n_samples
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn trial(&self, i: usize) -> &[f32] {
        let n = self.trial_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.trial_len();
        if n == 0 || self.data.len() % n != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} values do not form {}x{} trials",
                self.data.len(),
                self.n_channels,
                self.n_samples
            )));
        }
        if self.data.len() / n != self.meta.len() {
            return Err(Error::LengthMismatch {
                meta: self.meta.len(),
                tensor: self.data.len() / n,
            });
        }
        for m in &self.meta {
            if let Some(l) = category_to_label(&m.category) {
                if l as u8 != m.label {
                    return Err(Error::InvalidConfig(format!(
                        "trial {} has label {} but category {:?} implies {}",
                        m.trial_id, m.label, m.category, l as u8
                    )));
                }
            }
        }
        Ok(())
    }

    /// New set holding the given trials in the given order.
    pub fn subset(&self, indices: &[usize]) -> EpochSet {
        let n = self.trial_len();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.trial(i));
        }
        EpochSet {
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            data,
            meta: indices.iter().map(|&i| self.meta[i].clone()).collect(),
        }
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.meta[i].split == split).collect()
    }

    /// Class index per trial and the number of classes.
    pub fn targets(&self, target: Target) -> (Vec<usize>, usize) {
        match target {
            Target::Animacy => (self.meta.iter().map(|m| m.label as usize).collect(), 2),
            Target::Subject => {
                let mut subjects: Vec<u32> = self.meta.iter().map(|m| m.subject).collect();
                subjects.sort_unstable();
                subjects.dedup();
                let classes = self
                    .meta
                    .iter()
                    .map(|m| subjects.binary_search(&m.subject).unwrap_or(0))
                    .collect();
                (classes, subjects.len().max(2))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: u64, category: &str, label: u8) -> TrialMeta {
        TrialMeta {
            trial_id: id,
            subject: 1,
            concept_id: 0,
            concept_name: "x".into(),
            category: category.into(),
            label,
            split: Split::Train,
        }
    }

    #[test]
    fn validate_lengths_and_labels() {
        let ok = EpochSet::new(2, 3, vec![0.0; 12], vec![meta(0, "tool", 0), meta(1, "animal", 1)]);
        assert!(ok.is_ok());
        let short = EpochSet::new(2, 3, vec![0.0; 6], vec![meta(0, "tool", 0), meta(1, "animal", 1)]);
        assert!(matches!(short, Err(Error::LengthMismatch { meta: 2, tensor: 1 })));
        let wrong = EpochSet::new(2, 3, vec![0.0; 6], vec![meta(0, "tool", 1)]);
        assert!(wrong.is_err());
    }

    #[test]
    fn subject_targets_are_ranked() {
        let mut m = vec![meta(0, "tool", 0), meta(1, "tool", 0), meta(2, "tool", 0)];
        m[0].subject = 7;
        m[1].subject = 3;
        m[2].subject = 7;
        let set = EpochSet::new(1, 1, vec![0.0; 3], m).unwrap();
        assert_eq!(set.targets(Target::Subject), (vec![1, 0, 1], 2));
    }
}
