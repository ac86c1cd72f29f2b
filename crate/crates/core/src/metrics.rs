//! Classification metrics shared by trained models and the linear baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy plus macro-averaged and per-class precision and recall. A class
/// that is never predicted has precision 0; a class absent from the labels
/// has recall 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub class_precision: Vec<f64>,
    pub class_recall: Vec<f64>,
}

pub fn classification_metrics(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Mismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        predicted[p] += 1;
        actual[y] += 1;
        if p == y {
            tp[p] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let class_precision: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], predicted[c])).collect();
    let class_recall: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], actual[c])).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Metrics {
        accuracy: ratio(tp.iter().sum(), labels.len()),
        precision: mean(&class_precision),
        recall: mean(&class_recall),
        class_precision,
        class_recall,
    })
}
