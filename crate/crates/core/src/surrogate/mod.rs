//! Surrogate regressors: per-target gradient-boosted trees, a multi-output
//! MLP, and a learned convex ensemble, plus CV-driven tuning.

mod ensemble;
mod gbt;
mod metrics;
mod mlp;
mod tuning;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub use ensemble::{fit_simplex_weights, matrix_mse, project_to_simplex, train_ensemble, EnsembleModel};
pub use gbt::{train_gbt, GbtModel, GbtParams, Node, RegressionTree};
pub use metrics::{regression_metrics, RegressionMetrics, MAPE_ZERO_THRESHOLD};
pub use mlp::{train_mlp, Activation, DenseLayer, Gradients, MlpModel, MlpParams, Network};
pub use tuning::{
    cross_validate, tune, tune_with, Dist, GbtSpace, MlpSpace, RandomSearch, SearchSpace, SearchStrategy,
    TrialRecord, TuneResult,
};

/// Version tag written into serialized model bundles.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbt,
    Mlp,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparameters {
    Gbt(GbtParams),
    Mlp(MlpParams),
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        match self {
            Hyperparameters::Gbt(p) => p.validate(),
            Hyperparameters::Mlp(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictor {
    /// One boosted model per target.
    Gbt { models: Vec<GbtModel> },
    Mlp { model: MlpModel },
    Ensemble { model: EnsembleModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub hyperparameters: Option<Hyperparameters>,
    pub cv_score: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub wall_time_s: f64,
}

/// An immutable regressor mapping a design vector to every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSurrogate {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub predictor: Predictor,
    pub record: TrainingRecord,
}

impl TrainedSurrogate {
    /// Fits the model family selected by `hp` on every target of `train`.
    pub fn train(train: &TabularDataset, hp: &Hyperparameters, seed: u64) -> Result<Self> {
        hp.validate()?;
        let start = Instant::now();
        let predictor = match hp {
            Hyperparameters::Gbt(p) => {
                let models = (0..train.n_targets())
                    .into_par_iter()
                    .map(|t| train_gbt(train, t, p))
                    .collect::<Result<Vec<_>>>()?;
                Predictor::Gbt { models }
            }
            Hyperparameters::Mlp(p) => Predictor::Mlp { model: train_mlp(train, p, seed)? },
        };
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            feature_names: train.feature_names().to_vec(),
            target_names: train.target_names().to_vec(),
            predictor,
            record: TrainingRecord {
                hyperparameters: Some(hp.clone()),
                cv_score: None,
                seed,
                wall_time_s: start.elapsed().as_secs_f64(),
            },
        })
    }

    /// Wraps a learned ensemble; names are taken from the first member.
    pub fn from_ensemble(model: EnsembleModel, seed: u64) -> Result<Self> {
        let first = model.members.first().ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            feature_names: first.feature_names.clone(),
            target_names: first.target_names.clone(),
            predictor: Predictor::Ensemble { model },
            record: TrainingRecord { hyperparameters: None, cv_score: None, seed, wall_time_s: 0.0 },
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self.predictor {
            Predictor::Gbt { .. } => ModelKind::Gbt,
            Predictor::Mlp { .. } => ModelKind::Mlp,
            Predictor::Ensemble { .. } => ModelKind::Ensemble,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_names.len()
    }

    pub fn gbt_models(&self) -> Option<&[GbtModel]> {
        match &self.predictor {
            Predictor::Gbt { models } => Some(models),
            _ => None,
        }
    }

    /// `q x d` designs to `q x m` predictions.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), found: x.cols() });
        }
        match &self.predictor {
            Predictor::Gbt { models } => {
                let mut out = Matrix::zeros(x.rows(), models.len());
                for i in 0..x.rows() {
                    for (t, m) in models.iter().enumerate() {
                        out.set(i, t, m.predict_row(x.row(i)));
                    }
                }
                Ok(out)
            }
            Predictor::Mlp { model } => model.predict(x),
            Predictor::Ensemble { model } => model.predict(x),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.predict(&m)?.row(0).to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-target MAPE, MSE and residuals of `model` on `test`.
pub fn evaluate(model: &TrainedSurrogate, test: &TabularDataset) -> Result<Vec<RegressionMetrics>> {
    if model.n_targets() != test.n_targets() {
        return Err(Error::DimensionMismatch { expected: model.n_targets(), found: test.n_targets() });
    }
    let pred = model.predict(test.features())?;
    (0..test.n_targets())
        .map(|t| regression_metrics(&test.target_names()[t], &test.targets().column(t), &pred.column(t)))
        .collect()
}

pub(crate) fn fold_seed(seed: u64, fold: usize) -> u64 {
    rng::derive_seed(seed, &[0xF01D, fold as u64])
}
