//! Per-object (concept) accuracy profiles.

use serde::{Deserialize, Serialize};

use crate::dataset::{Concept, TrialMeta};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectAccuracyProfile {
    pub concept_ids: Vec<u32>,
    pub categories: Vec<String>,
    /// `None` for concepts without test trials.
    pub accuracy: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl ObjectAccuracyProfile {
    pub fn len(&self) -> usize {
        self.concept_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concept_ids.is_empty()
    }

    /// Concepts with no test trials.
    pub fn missing(&self) -> Vec<u32> {
        self.concept_ids
            .iter()
            .zip(&self.accuracy)
            .filter(|(_, a)| a.is_none())
            .map(|(&id, _)| id)
            .collect()
    }

    /// Correctly classified trials per concept.
    pub fn correct(&self) -> Vec<f64> {
        self.accuracy
            .iter()
            .zip(&self.counts)
            .map(|(a, &n)| a.unwrap_or(0.0) * n as f64)
            .collect()
    }
}

/// Accuracy of `predictions` (animacy class per trial, aligned with
/// `meta`) for every concept in `concepts`.
pub fn per_object_accuracy(predictions: &[usize], meta: &[TrialMeta], concepts: &[Concept]) -> Result<ObjectAccuracyProfile> {
    if predictions.len() != meta.len() {
        return Err(Error::Mismatch(predictions.len(), meta.len()));
    }
    let mut correct = vec![0usize; concepts.len()];
    let mut counts = vec![0usize; concepts.len()];
    for (&p, m) in predictions.iter().zip(meta) {
        let slot = concepts
            .iter()
            .position(|c| c.id == m.concept_id)
            .ok_or_else(|| Error::InvalidConfig(format!("trial {} has unknown concept {}", m.trial_id, m.concept_id)))?;
        counts[slot] += 1;
        correct[slot] += usize::from(p == m.label as usize);
    }
    Ok(ObjectAccuracyProfile {
        concept_ids: concepts.iter().map(|c| c.id).collect(),
        categories: concepts.iter().map(|c| c.category.to_string()).collect(),
        accuracy: correct
            .iter()
            .zip(&counts)
            .map(|(&k, &n)| (n > 0).then(|| k as f64 / n as f64))
            .collect(),
        counts,
    })
}

/// Mean accuracy per object across profiles over the same concepts;
/// `None` where any profile lacks trials for the object.
pub fn mean_profile(profiles: &[&ObjectAccuracyProfile]) -> Result<Vec<Option<f64>>> {
    let first = profiles.first().ok_or(Error::EmptyHistory)?;
    for p in profiles {
        if p.concept_ids != first.concept_ids {
            return Err(Error::Mismatch(p.len(), first.len()));
        }
    }
    Ok((0..first.len())
        .map(|i| {
            let vals: Option<Vec<f64>> = profiles.iter().map(|p| p.accuracy[i]).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{concept_table, Split};

    fn trial(id: u64, concept: &Concept) -> TrialMeta {
        TrialMeta {
            trial_id: id,
            subject: 1,
            concept_id: concept.id,
            concept_name: concept.name.clone(),
            category: concept.category.into(),
            label: concept.label as u8,
            split: Split::Test,
        }
    }

    #[test]
    fn three_of_four() {
        let concepts = concept_table();
        let c = &concepts[0];
        let meta: Vec<TrialMeta> = (0..4).map(|i| trial(i, c)).collect();
        let y = c.label as usize;
        let profile = per_object_accuracy(&[y, y, y, 1 - y], &meta, &concepts[..1]).unwrap();
        assert_eq!(profile.accuracy, vec![Some(0.75)]);
        assert_eq!(profile.counts, vec![4]);
    }

    #[test]
    fn missing_concepts_are_flagged() {
        let concepts = concept_table();
        let meta = vec![trial(0, &concepts[3])];
        let profile = per_object_accuracy(&[concepts[3].label as usize], &meta, &concepts).unwrap();
        assert_eq!(profile.accuracy[3], Some(1.0));
        assert_eq!(profile.missing().len(), concepts.len() - 1);
        assert_eq!(profile.counts.iter().sum::<usize>(), 1);
    }
}
