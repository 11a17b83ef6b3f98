//! NSGA-II over any objective evaluator, plus Pareto-front extraction.

mod nsga2;
mod operators;
mod sort;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureBounds;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::surrogate::TrainedSurrogate;

pub use nsga2::{nsga2_run, Nsga2Config, Nsga2Result};
pub use operators::{polynomial_mutation, sbx_crossover};
pub use sort::{crowding_distance, fast_non_dominated_sort};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Maps a value into the internal all-minimize orientation (an involution).
    #[inline]
    pub fn orient(self, v: f64) -> f64 {
        match self {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        }
    }
}

/// Flips maximize objectives so every column is minimized.
pub fn orient_row(row: &[f64], directions: &[Direction]) -> Vec<f64> {
    row.iter().zip(directions).map(|(v, d)| d.orient(*v)).collect()
}

pub fn orient_matrix(m: &Matrix, directions: &[Direction]) -> Matrix {
    let rows: Vec<Vec<f64>> = m.iter_rows().map(|r| orient_row(r, directions)).collect();
    Matrix::from_vec(m.rows(), m.cols(), rows.concat()).unwrap()
}

/// Box domain, objective names and optimization directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub bounds: FeatureBounds,
    pub objective_names: Vec<String>,
    pub directions: Vec<Direction>,
}

impl ProblemSpec {
    pub fn new(bounds: FeatureBounds, objective_names: Vec<String>, directions: Vec<Direction>) -> Result<Self> {
        if objective_names.len() < 2 {
            return Err(Error::InvalidArgument("need at least two objectives".into()));
        }
        if directions.len() != objective_names.len() {
            return Err(Error::DimensionMismatch { expected: objective_names.len(), found: directions.len() });
        }
        Ok(Self { bounds, objective_names, directions })
    }

    pub fn n_objectives(&self) -> usize {
        self.objective_names.len()
    }
}

/// Maps a design vector to objective values; `None` marks an infeasible
/// or failed evaluation.
pub trait ObjectiveEvaluator: Sync {
    fn evaluate(&self, x: &[f64]) -> Option<Vec<f64>>;

    /// Batch evaluation; must equal row-by-row `evaluate`.
    fn evaluate_many(&self, xs: &[Vec<f64>]) -> Vec<Option<Vec<f64>>> {
        use rayon::prelude::*;
        xs.par_iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<F> ObjectiveEvaluator for F
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Option<Vec<f64>> {
        self(x)
    }
}

impl ObjectiveEvaluator for TrainedSurrogate {
    fn evaluate(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.predict_row(x).ok()
    }

    fn evaluate_many(&self, xs: &[Vec<f64>]) -> Vec<Option<Vec<f64>>> {
        match Matrix::from_rows(xs).and_then(|m| self.predict(&m)) {
            Ok(p) => p.iter_rows().map(|r| Some(r.to_vec())).collect(),
            Err(_) => vec![None; xs.len()],
        }
    }
}

/// A population member. `objectives` are in minimize orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    pub objectives: Vec<f64>,
    pub feasible: bool,
    pub rank: usize,
    pub crowding: f64,
}

/// Mutually non-dominated individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Objectives converted back to the problem's own orientation.
    pub fn objectives(&self, directions: &[Direction]) -> Matrix {
        let rows: Vec<Vec<f64>> = self.members.iter().map(|m| orient_row(&m.objectives, directions)).collect();
        Matrix::from_vec(rows.len(), directions.len(), rows.concat()).unwrap()
    }

    pub fn designs(&self) -> Matrix {
        let d = self.members.first().map_or(0, |m| m.x.len());
        let rows: Vec<Vec<f64>> = self.members.iter().map(|m| m.x.clone()).collect();
        Matrix::from_vec(rows.len(), d, rows.concat()).unwrap()
    }
}

/// Minimize-orientation dominance: `a <= b` everywhere, `<` somewhere.
#[inline]
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices (ascending) of the non-dominated rows of `points`. Exact
/// duplicates do not dominate each other, so all copies are kept.
pub fn pareto_filter(points: &Matrix, directions: &[Direction]) -> Result<Vec<usize>> {
    if points.cols() != directions.len() {
        return Err(Error::DimensionMismatch { expected: directions.len(), found: points.cols() });
    }
    let oriented = orient_matrix(points, directions);
    Ok(non_dominated_indices(&oriented.to_rows()))
}

/// Non-dominated subset of minimize-oriented points, in input order.
pub fn non_dominated_indices<R: AsRef<[f64]>>(points: &[R]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|p| dominates(p.as_ref(), points[i].as_ref())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_examples() {
        let dirs = [Direction::Minimize; 2];
        let m = Matrix::from_rows(&[[1.0, 1.0], [0.0, 2.0], [2.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(pareto_filter(&m, &dirs).unwrap(), vec![0, 1, 2]);
        let single = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(pareto_filter(&single, &dirs).unwrap(), vec![0]);
        let dup = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert_eq!(pareto_filter(&dup, &dirs).unwrap(), vec![0, 1]);
    }

    #[test]
    fn maximize_flip_preserves_selection() {
        let m = Matrix::from_rows(&[[1.0, 5.0], [2.0, 7.0], [3.0, 6.0], [0.5, 1.0]]).unwrap();
        let a = pareto_filter(&m, &[Direction::Minimize, Direction::Maximize]).unwrap();
        let negated = Matrix::from_rows(&[[1.0, -5.0], [2.0, -7.0], [3.0, -6.0], [0.5, -1.0]]).unwrap();
        let b = pareto_filter(&negated, &[Direction::Minimize, Direction::Minimize]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec![0, 1, 3]);
    }

    #[test]
    fn problem_needs_two_objectives() {
        let b = FeatureBounds::uniform(1, 0.0, 1.0).unwrap();
        assert!(ProblemSpec::new(b.clone(), vec!["f".into()], vec![Direction::Minimize]).is_err());
        assert!(ProblemSpec::new(b, vec!["f".into(), "g".into()], vec![Direction::Minimize]).is_err());
    }
}
