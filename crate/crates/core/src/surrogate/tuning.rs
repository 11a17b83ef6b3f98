//! Cross-validation and hyperparameter search.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensemble::matrix_mse, fold_seed, Activation, GbtParams, Hyperparameters, MlpParams, TrainedSurrogate};
use crate::dataset::{shuffled_indices, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// One-dimensional sampling distribution for a numeric hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dist {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    /// Inclusive integer range.
    Int { lo: i64, hi: i64 },
    Choice { values: Vec<f64> },
}

impl Dist {
    fn check(&self, name: &str) -> Result<()> {
        let ok = match self {
            Dist::Fixed { value } => value.is_finite(),
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Dist::LogUniform { lo, hi } => *lo > 0.0 && hi.is_finite() && lo <= hi,
            Dist::Int { lo, hi } => lo <= hi,
            Dist::Choice { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::EmptySearchSpace(format!("{name}: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Dist::Fixed { value } => *value,
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Dist::LogUniform { lo, hi } => (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp(),
            Dist::Int { lo, hi } => rng.gen_range(*lo..=*hi) as f64,
            Dist::Choice { values } => *values.choose(rng).unwrap(),
        }
    }

    fn sample_count(&self, rng: &mut Rng) -> usize {
        self.sample(rng).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtSpace {
    pub n_trees: Dist,
    pub max_depth: Dist,
    pub learning_rate: Dist,
    pub min_samples_leaf: Dist,
}

impl Default for GbtSpace {
    fn default() -> Self {
        Self {
            n_trees: Dist::Int { lo: 50, hi: 600 },
            max_depth: Dist::Int { lo: 1, hi: 6 },
            learning_rate: Dist::LogUniform { lo: 0.02, hi: 0.3 },
            min_samples_leaf: Dist::Int { lo: 1, hi: 10 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpace {
    pub hidden: Vec<Vec<usize>>,
    pub activation: Vec<Activation>,
    pub learning_rate: Dist,
    pub epochs: Dist,
    pub batch_size: Dist,
    pub weight_decay: Dist,
}

impl Default for MlpSpace {
    fn default() -> Self {
        Self {
            hidden: vec![vec![32], vec![64], vec![128]],
            activation: vec![Activation::Relu],
            learning_rate: Dist::LogUniform { lo: 1e-3, hi: 3e-2 },
            epochs: Dist::Int { lo: 200, hi: 800 },
            batch_size: Dist::Choice { values: vec![0.0, 64.0] },
            weight_decay: Dist::Choice { values: vec![0.0, 1e-5, 1e-4] },
        }
    }
}

impl MlpSpace {
    /// Two-hidden-layer tanh variant.
    pub fn deep() -> Self {
        Self {
            hidden: vec![vec![64, 32], vec![64, 64], vec![128, 64]],
            activation: vec![Activation::Tanh],
            learning_rate: Dist::LogUniform { lo: 1e-3, hi: 1e-2 },
            epochs: Dist::Int { lo: 200, hi: 600 },
            batch_size: Dist::Choice { values: vec![0.0, 64.0] },
            weight_decay: Dist::Choice { values: vec![0.0, 1e-4] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SearchSpace {
    Gbt(GbtSpace),
    Mlp(MlpSpace),
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            SearchSpace::Gbt(s) => {
                s.n_trees.check("n_trees")?;
                s.max_depth.check("max_depth")?;
                s.learning_rate.check("learning_rate")?;
                s.min_samples_leaf.check("min_samples_leaf")
            }
            SearchSpace::Mlp(s) => {
                if s.hidden.is_empty() {
                    return Err(Error::EmptySearchSpace("hidden: no layer layouts".into()));
                }
                if s.activation.is_empty() {
                    return Err(Error::EmptySearchSpace("activation: no choices".into()));
                }
                s.learning_rate.check("learning_rate")?;
                s.epochs.check("epochs")?;
                s.batch_size.check("batch_size")?;
                s.weight_decay.check("weight_decay")
            }
        }
    }

    /// Draws one configuration; the result is range-checked.
    pub fn sample(&self, rng: &mut Rng) -> Result<Hyperparameters> {
        let hp = match self {
            SearchSpace::Gbt(s) => Hyperparameters::Gbt(GbtParams {
                n_trees: s.n_trees.sample_count(rng),
                max_depth: s.max_depth.sample_count(rng),
                learning_rate: s.learning_rate.sample(rng),
                min_samples_leaf: s.min_samples_leaf.sample_count(rng),
            }),
            SearchSpace::Mlp(s) => Hyperparameters::Mlp(MlpParams {
                hidden: s.hidden.choose(rng).unwrap().clone(),
                activation: *s.activation.choose(rng).unwrap(),
                learning_rate: s.learning_rate.sample(rng),
                epochs: s.epochs.sample_count(rng),
                batch_size: s.batch_size.sample_count(rng),
                weight_decay: s.weight_decay.sample(rng),
            }),
        };
        hp.validate()?;
        Ok(hp)
    }
}

/// Mean validation MSE (over every target) across `k` seeded folds.
pub fn cross_validate(train: &TabularDataset, hp: &Hyperparameters, k: usize, seed: u64) -> Result<f64> {
    let n = train.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("fold count {k} outside [2, {n}]")));
    }
    let order = shuffled_indices(n, rng::derive_seed(seed, &[0xC5]));
    let scores = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (mut valid, mut fit) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if pos % k == fold {
                    valid.push(i);
                } else {
                    fit.push(i);
                }
            }
            let model = TrainedSurrogate::train(&train.select_rows(&fit), hp, fold_seed(seed, fold))?;
            let held = train.select_rows(&valid);
            Ok(matrix_mse(&model.predict(held.features())?, held.targets()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    /// `None` when the trial failed.
    pub cv_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyperparameters,
    pub best_score: f64,
    pub trials: Vec<TrialRecord>,
}

/// Proposes configurations for the tuning loop.
pub trait SearchStrategy {
    /// Proposals in one batch are evaluated together and see the history
    /// up to the start of the batch.
    fn batch_size(&self) -> usize {
        1
    }

    fn propose(&mut self, space: &SearchSpace, trial: usize, history: &[TrialRecord]) -> Result<Hyperparameters>;
}

/// Independent draws; trial `t` uses the stream `(seed, t)`.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    seed: u64,
}

impl RandomSearch {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl SearchStrategy for RandomSearch {
    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn propose(&mut self, space: &SearchSpace, trial: usize, _history: &[TrialRecord]) -> Result<Hyperparameters> {
        space.sample(&mut rng::stream(self.seed, &[0x7E, trial as u64]))
    }
}

/// Random search with `budget` trials scored by `k`-fold CV.
pub fn tune(train: &TabularDataset, space: &SearchSpace, budget: usize, k: usize, seed: u64) -> Result<TuneResult> {
    tune_with(&mut RandomSearch::new(seed), train, space, budget, k, seed)
}

/// Every trial shares one fold assignment so scores are comparable.
pub fn tune_with(
    strategy: &mut dyn SearchStrategy,
    train: &TabularDataset,
    space: &SearchSpace,
    budget: usize,
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("tuning budget must be >= 1".into()));
    }
    space.validate()?;
    let cv_seed = rng::derive_seed(seed, &[0xC0]);
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(budget);
    while trials.len() < budget {
        let batch = strategy.batch_size().clamp(1, budget - trials.len());
        let start = trials.len();
        let proposals =
            (start..start + batch).map(|t| strategy.propose(space, t, &trials)).collect::<Result<Vec<_>>>()?;
        let scored: Vec<TrialRecord> = proposals
            .into_par_iter()
            .enumerate()
            .map(|(offset, hp)| {
                let (cv_score, error) = match cross_validate(train, &hp, k, cv_seed) {
                    Ok(s) if s.is_finite() => (Some(s), None),
                    Ok(s) => (None, Some(format!("non-finite CV score {s}"))),
                    Err(e @ (Error::TrainingFailed(_) | Error::HyperparameterOutOfRange(_))) => {
                        (None, Some(e.to_string()))
                    }
                    Err(e) => return Err(e),
                };
                Ok(TrialRecord { index: start + offset, hyperparameters: hp, cv_score, error })
            })
            .collect::<Result<Vec<_>>>()?;
        trials.extend(scored);
    }
    let best = trials
        .iter()
        .filter_map(|t| t.cv_score.map(|s| (s, t)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index)))
        .ok_or_else(|| Error::TrainingFailed("every tuning trial failed".into()))?;
    Ok(TuneResult { best: best.1.hyperparameters.clone(), best_score: best.0, trials })
}
