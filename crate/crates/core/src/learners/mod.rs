//! Feature encoding, outcome classifiers (logistic, random forest),
//! regressors for the meta-learners, and ranking metrics.

mod encode;
mod forest;
mod linear;
mod metrics;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use encode::{
    encode, CategoricalEncoding, CategoricalField, ContinuousEncoding, ContinuousField, EncodingMetadata,
    FeatureMatrix,
};
pub use forest::{fit_forest, fit_forest_regressor, ForestConfig, ForestModel, Node, Task, Tree};
pub use linear::{fit_linear, fit_logistic_classifier, LinearModel, LogisticClassifier};
pub use metrics::{auroc, classify};

use crate::cohort::CohortRecord;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" => Ok(ModelKind::Logistic),
            "forest" => Ok(ModelKind::Forest),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Logistic(LogisticClassifier),
    Forest(ForestModel),
}

impl Classifier {
    pub fn fit(kind: ModelKind, x: &FeatureMatrix, y: &[u8], forest: &ForestConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Logistic => Classifier::Logistic(fit_logistic_classifier(x, y)?),
            ModelKind::Forest => Classifier::Forest(fit_forest(x, y, forest, seed)?),
        })
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Classifier::Logistic(m) => m.predict_proba(x),
            Classifier::Forest(m) => m.predict_proba(x),
        }
    }
}

/// Base regressor for the meta-learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLearner {
    Linear,
    Forest(ForestConfig),
}

impl Default for BaseLearner {
    fn default() -> Self {
        BaseLearner::Forest(ForestConfig::default())
    }
}

impl BaseLearner {
    /// Smallest training set the learner accepts.
    pub fn min_rows(&self) -> usize {
        match self {
            BaseLearner::Linear => 2,
            BaseLearner::Forest(c) => 2 * c.min_leaf,
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, y: &[f64], seed: u64) -> Result<Regressor> {
        if x.n_rows < self.min_rows() {
            return Err(Error::InvalidInput(format!(
                "{} rows is too few for the base learner (minimum {})",
                x.n_rows,
                self.min_rows()
            )));
        }
        Ok(match self {
            BaseLearner::Linear => Regressor::Linear(fit_linear(x, y)?),
            BaseLearner::Forest(c) => Regressor::Forest(fit_forest_regressor(x, y, c, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Regressor {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Regressor::Linear(m) => m.predict(x),
            Regressor::Forest(m) => m.predict(x),
        }
    }
}

/// A classifier bundled with the encoding it was trained on, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub metadata: EncodingMetadata,
    pub threshold: f64,
    pub model: Classifier,
}

impl TrainedModel {
    /// Trains on records carrying the normal-pressure outcome.
    pub fn train(records: &[CohortRecord], kind: ModelKind, forest: &ForestConfig, seed: u64) -> Result<Self> {
        let metadata = EncodingMetadata::fit(records, true)?;
        let x = encode(records, Some(&metadata))?;
        let y = outcome_labels(records)?;
        Ok(Self {
            model: Classifier::fit(kind, &x, &y, forest, seed)?,
            metadata,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn predict_proba(&self, records: &[CohortRecord]) -> Result<Vec<f64>> {
        self.model.predict_proba(&encode(records, Some(&self.metadata))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Normal-pressure outcome of each record.
pub fn outcome_labels(records: &[CohortRecord]) -> Result<Vec<u8>> {
    records.iter().map(crate::cohort::label_outcome).collect()
}
