//! Surrogate-assisted multiobjective design optimization.
//!
//! Train regressors on a small tabular design database, explain them, run
//! NSGA-II against the learned surrogates, validate the predicted Pareto
//! candidates on a ground-truth evaluator, and score the validated fronts
//! with GD, GD+ and hypervolume.

pub mod dataset;
pub mod error;
pub mod indicators;
pub mod matrix;
pub mod moo;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod surrogate;
pub mod xai;

pub use dataset::{FeatureBounds, TabularDataset};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use moo::{Direction, ObjectiveEvaluator, ParetoFront, ProblemSpec};
pub use oracle::OracleProblem;
pub use surrogate::{Hyperparameters, TrainedSurrogate};
