//! Mean object accuracy per top-down category, per animacy label and
//! overall.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::objects::{mean_profile, ObjectAccuracyProfile};
use crate::dataset::{category_to_label, Label, CATEGORIES};
use crate::error::{Error, Result};

pub const ALL_CATEGORIES: &str = "all";
pub const TOTAL_LABEL: &str = "total";

/// How several models' profiles combine into one accuracy per object.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of the models' per-object accuracies.
    #[default]
    MeanOfModels,
    /// Correct trials over all models' trials per object.
    Pooled,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Aggregation::MeanOfModels => "mean_of_models",
            Aggregation::Pooled => "pooled",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_of_models" => Ok(Aggregation::MeanOfModels),
            "pooled" => Ok(Aggregation::Pooled),
            _ => Err(Error::InvalidConfig(format!("unknown aggregation {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub label: String,
    pub category: String,
    pub n_objects: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    /// Categories in reporting order, then one row per label, then the total.
    pub rows: Vec<CategoryRow>,
    /// Categories without any scored object.
    pub omitted: Vec<String>,
}

/// One accuracy per object, combined across profiles.
pub fn combine_profiles(profiles: &[&ObjectAccuracyProfile], how: Aggregation) -> Result<Vec<Option<f64>>> {
    match how {
        Aggregation::MeanOfModels => mean_profile(profiles),
        Aggregation::Pooled => {
            mean_profile(profiles)?;
            let first = profiles[0];
            Ok((0..first.len())
                .map(|i| {
                    let n: usize = profiles.iter().map(|p| p.counts[i]).sum();
                    let k: f64 = profiles.iter().map(|p| p.correct()[i]).sum();
                    (n > 0).then(|| k / n as f64)
                })
                .collect())
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn category_table(profiles: &[&ObjectAccuracyProfile], how: Aggregation) -> Result<CategoryTable> {
    let acc = combine_profiles(profiles, how)?;
    let categories = &profiles[0].categories;
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    let scored = |pred: &dyn Fn(&str) -> bool| -> Vec<f64> {
        categories
            .iter()
            .zip(&acc)
            .filter(|(c, _)| pred(c))
            .filter_map(|(_, a)| *a)
            .collect()
    };
    for info in &CATEGORIES {
        let vals = scored(&|c| c == info.name);
        if vals.is_empty() {
            omitted.push(info.name.to_string());
            continue;
        }
        rows.push(CategoryRow {
            label: info.label.name().into(),
            category: info.name.into(),
            n_objects: vals.len(),
            accuracy: mean(&vals),
        });
    }
    for label in [Label::Alive, Label::Nonliving] {
        let vals = scored(&|c| category_to_label(c) == Some(label));
        if !vals.is_empty() {
            rows.push(CategoryRow {
                label: label.name().into(),
                category: ALL_CATEGORIES.into(),
                n_objects: vals.len(),
                accuracy: mean(&vals),
            });
        }
    }
    let vals = scored(&|c| category_to_label(c).is_some());
    if !vals.is_empty() {
        rows.push(CategoryRow {
            label: TOTAL_LABEL.into(),
            category: ALL_CATEGORIES.into(),
            n_objects: vals.len(),
            accuracy: mean(&vals),
        });
    }
    Ok(CategoryTable { rows, omitted })
}
