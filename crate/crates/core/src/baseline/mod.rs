//! CSP+LDA linear comparator: log-variance features of the most
//! discriminative spatial filters, classified by a linear discriminant.

mod csp;
mod lda;

pub use csp::{
    class_covariances, csp_features, csp_from_covariances, fit_csp, normalized_covariance, CspModel, VARIANCE_EPS,
};
pub use lda::{fit_lda, LdaModel, SHRINKAGE_EPS};

use serde::{Deserialize, Serialize};

use crate::dataset::{EpochSet, Target};
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics, Metrics};

/// Filter pairs taken from each end of the spectrum.
pub const DEFAULT_FILTER_PAIRS: usize = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CspLdaModel {
    pub csp: CspModel,
    pub lda: LdaModel,
}

impl CspLdaModel {
    pub fn fit(train: &EpochSet, m: usize) -> Result<Self> {
        let (labels, _) = train.targets(Target::Animacy);
        let csp = fit_csp(train, &labels, m)?;
        let features = features_of(train, &csp);
        let lda = fit_lda(&features, &labels, SHRINKAGE_EPS)?;
        Ok(CspLdaModel { csp, lda })
    }

    /// Predicted class and discriminant score per trial.
    pub fn predict(&self, set: &EpochSet) -> Result<Vec<(usize, f64)>> {
        if set.n_channels != self.csp.n_channels {
            return Err(Error::ChannelCount {
                expected: self.csp.n_channels,
                found: set.n_channels,
            });
        }
        Ok(features_of(set, &self.csp).iter().map(|f| self.lda.predict(f)).collect())
    }
}

fn features_of(set: &EpochSet, csp: &CspModel) -> Vec<Vec<f64>> {
    (0..set.len())
        .map(|i| csp_features(set.trial(i), set.n_samples, csp))
        .collect()
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub model: CspLdaModel,
    pub metrics: Metrics,
    pub predictions: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Fits on `train`, evaluates on `test`.
pub fn csp_lda_pipeline(train: &EpochSet, test: &EpochSet, m: usize) -> Result<BaselineRun> {
    if test.is_empty() {
        return Err(Error::EmptySplit);
    }
    let model = CspLdaModel::fit(train, m)?;
    let (predictions, scores): (Vec<usize>, Vec<f64>) = model.predict(test)?.into_iter().unzip();
    let (labels, n_classes) = test.targets(Target::Animacy);
    let metrics = classification_metrics(&predictions, &labels, n_classes)?;
    Ok(BaselineRun {
        model,
        metrics,
        predictions,
        scores,
    })
}
