use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::simulation_rate;
use crate::matrix::Matrix;
use crate::moo::{orient_row, Direction, ParetoFront};
use crate::oracle::{EvaluationOutcome, OracleProblem};
use crate::surrogate::regression_metrics;

/// A predicted Pareto candidate; `id` is its position in the predicted front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub x: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedCandidate {
    pub id: usize,
    pub x: Vec<f64>,
    pub predicted: Vec<f64>,
    pub validated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub candidates: usize,
    pub validated: Vec<ValidatedCandidate>,
    pub dropped: usize,
    pub simulation_rate: f64,
    /// Per-objective MAPE of predictions against validated values; `None`
    /// when nothing validated or every validated value is near zero.
    pub mape: Vec<Option<f64>>,
    pub all_infeasible: bool,
}

impl ValidationOutcome {
    /// Validated objective values, one row per surviving candidate.
    pub fn validated_objectives(&self, m: usize) -> Matrix {
        let rows: Vec<&[f64]> = self.validated.iter().map(|c| c.validated.as_slice()).collect();
        Matrix::from_vec(rows.len(), m, rows.concat()).expect("consistent objective count")
    }
}

/// Front members as candidates, predictions in the problem's orientation.
pub fn front_candidates(front: &ParetoFront, directions: &[Direction]) -> Vec<Candidate> {
    front
        .members
        .iter()
        .enumerate()
        .map(|(id, m)| Candidate { id, x: m.x.clone(), predicted: orient_row(&m.objectives, directions) })
        .collect()
}

/// Keeps at most `cap` rows of `points` by repeatedly removing the point
/// closest to its nearest neighbor (lowest index on ties), measured after
/// per-column min/max scaling. Returns kept indices in ascending order.
pub fn thin_by_nearest_neighbor(points: &Matrix, cap: usize) -> Vec<usize> {
    let n = points.rows();
    if n <= cap {
        return (0..n).collect();
    }
    let m = points.cols();
    let mut scaled = points.clone();
    for j in 0..m {
        let col = points.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if hi > lo { hi - lo } else { 1.0 };
        for i in 0..n {
            scaled.set(i, j, (points.get(i, j) - lo) / range);
        }
    }
    let dist = |a: usize, b: usize| -> f64 {
        scaled.row(a).iter().zip(scaled.row(b)).map(|(x, y)| (x - y).powi(2)).sum()
    };
    let mut alive = vec![true; n];
    let nearest_of = |i: usize, alive: &[bool]| -> (f64, usize) {
        (0..n)
            .filter(|&k| k != i && alive[k])
            .map(|k| (dist(i, k), k))
            .fold((f64::INFINITY, usize::MAX), |best, c| if c.0 < best.0 { c } else { best })
    };
    let mut nearest: Vec<(f64, usize)> = (0..n).map(|i| nearest_of(i, &alive)).collect();
    for _ in cap..n {
        let victim = (0..n)
            .filter(|&i| alive[i])
            .fold(None::<usize>, |best, i| match best {
                Some(b) if nearest[b].0 <= nearest[i].0 => Some(b),
                _ => Some(i),
            })
            .expect("at least one live point");
        alive[victim] = false;
        for i in 0..n {
            if alive[i] && nearest[i].1 == victim {
                nearest[i] = nearest_of(i, &alive);
            }
        }
    }
    (0..n).filter(|&i| alive[i]).collect()
}

/// Candidates left after capping, thinned in predicted-objective space.
pub fn select_candidates(candidates: Vec<Candidate>, cap: usize) -> Vec<Candidate> {
    if candidates.len() <= cap {
        return candidates;
    }
    let rows: Vec<&[f64]> = candidates.iter().map(|c| c.predicted.as_slice()).collect();
    let kept = thin_by_nearest_neighbor(&Matrix::from_rows(&rows).expect("consistent width"), cap);
    let mut keep = vec![false; candidates.len()];
    for k in kept {
        keep[k] = true;
    }
    candidates.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

/// Re-evaluates every candidate on the oracle, dropping infeasible ones.
pub fn validate_candidates(
    candidates: &[Candidate],
    problem: OracleProblem,
    objective_names: &[String],
) -> Result<ValidationOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to validate".into()));
    }
    let m = problem.n_objectives();
    if objective_names.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: objective_names.len() });
    }
    let mut validated = Vec::new();
    for c in candidates {
        if c.x.len() != problem.n_variables() {
            return Err(Error::DimensionMismatch { expected: problem.n_variables(), found: c.x.len() });
        }
        if c.predicted.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: c.predicted.len() });
        }
        if let EvaluationOutcome::Objectives(f) = problem.evaluate(&c.x) {
            validated.push(ValidatedCandidate { id: c.id, x: c.x.clone(), predicted: c.predicted.clone(), validated: f });
        }
    }
    let mape = (0..m)
        .map(|j| {
            if validated.is_empty() {
                return Ok(None);
            }
            let truth: Vec<f64> = validated.iter().map(|c| c.validated[j]).collect();
            let pred: Vec<f64> = validated.iter().map(|c| c.predicted[j]).collect();
            match regression_metrics(&objective_names[j], &truth, &pred) {
                Ok(r) => Ok(Some(r.mape)),
                Err(Error::UndefinedMape) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationOutcome {
        candidates: candidates.len(),
        dropped: candidates.len() - validated.len(),
        simulation_rate: simulation_rate(candidates.len(), validated.len())?,
        all_infeasible: validated.is_empty(),
        validated,
        mape,
    })
}
