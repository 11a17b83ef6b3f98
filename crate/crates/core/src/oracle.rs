//! Analytic ground-truth problems: ZDT1, ZDT2, ZDT3, DTLZ2 and a
//! constrained ZDT1 variant with an excluded half-disk.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{latin_hypercube, uniform_random, FeatureBounds, TabularDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::moo::{Direction, ObjectiveEvaluator, ProblemSpec};

/// Squared radius of the excluded half-disk in ZDT1-disk.
pub const DISK_RADIUS_SQ: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleProblem {
    Zdt1,
    Zdt2,
    Zdt3,
    Dtlz2,
    Zdt1Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    OutOfBounds,
    ConstraintViolated,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluationOutcome {
    Objectives(Vec<f64>),
    Infeasible(InfeasibleReason),
}

impl EvaluationOutcome {
    pub fn objectives(&self) -> Option<&[f64]> {
        match self {
            Self::Objectives(f) => Some(f),
            Self::Infeasible(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Lhd,
    Uniform,
}

/// Generated dataset plus the number of infeasible samples dropped.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub dataset: TabularDataset,
    pub dropped_rows: usize,
}

impl OracleProblem {
    pub const ALL: [OracleProblem; 5] = [Self::Zdt1, Self::Zdt2, Self::Zdt3, Self::Dtlz2, Self::Zdt1Disk];

    pub fn name(self) -> &'static str {
        match self {
            Self::Zdt1 => "zdt1",
            Self::Zdt2 => "zdt2",
            Self::Zdt3 => "zdt3",
            Self::Dtlz2 => "dtlz2",
            Self::Zdt1Disk => "zdt1-disk",
        }
    }

    pub fn n_variables(self) -> usize {
        match self {
            Self::Dtlz2 => 12,
            _ => 30,
        }
    }

    pub fn n_objectives(self) -> usize {
        match self {
            Self::Dtlz2 => 3,
            _ => 2,
        }
    }

    pub fn bounds(self) -> FeatureBounds {
        FeatureBounds::uniform(self.n_variables(), 0.0, 1.0).expect("unit box")
    }

    pub fn directions(self) -> Vec<Direction> {
        vec![Direction::Minimize; self.n_objectives()]
    }

    pub fn feature_names(self) -> Vec<String> {
        (0..self.n_variables()).map(|j| format!("x_{j}")).collect()
    }

    pub fn objective_names(self) -> Vec<String> {
        (1..=self.n_objectives()).map(|j| format!("f{j}")).collect()
    }

    pub fn spec(self) -> ProblemSpec {
        ProblemSpec::new(self.bounds(), self.objective_names(), self.directions()).expect("valid problem")
    }

    pub fn true_front_available(self) -> bool {
        matches!(self, Self::Zdt1 | Self::Zdt2 | Self::Dtlz2)
    }

    /// True when `x` lies in the excluded region. Only ZDT1-disk has one:
    /// the half-disk `(x_0 - 0.5)^2 + x_1^2 < 0.04`, which cuts the middle
    /// of the unconstrained Pareto set.
    pub fn violates_constraint(self, x: &[f64]) -> bool {
        self == Self::Zdt1Disk && (x[0] - 0.5).powi(2) + x[1].powi(2) < DISK_RADIUS_SQ
    }

    /// Evaluates one design. Panics if `x` has the wrong length.
    pub fn evaluate(self, x: &[f64]) -> EvaluationOutcome {
        assert_eq!(x.len(), self.n_variables(), "design length");
        if !x.iter().all(|v| (0.0..=1.0).contains(v)) {
            return EvaluationOutcome::Infeasible(InfeasibleReason::OutOfBounds);
        }
        if self.violates_constraint(x) {
            return EvaluationOutcome::Infeasible(InfeasibleReason::ConstraintViolated);
        }
        EvaluationOutcome::Objectives(match self {
            Self::Zdt1 | Self::Zdt1Disk => zdt(x, |r| 1.0 - r.sqrt(), |_| 0.0),
            Self::Zdt2 => zdt(x, |r| 1.0 - r * r, |_| 0.0),
            Self::Zdt3 => zdt(x, |r| 1.0 - r.sqrt(), |f1| f1 * (10.0 * PI * f1).sin()),
            Self::Dtlz2 => dtlz2(x, 3),
        })
    }

    /// `n` points on the analytic Pareto front.
    pub fn true_front(self, n: usize) -> Result<Matrix> {
        if !self.true_front_available() {
            return Err(Error::FrontUnavailable(self.name().to_string()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("true front needs n >= 2".into()));
        }
        let rows: Vec<Vec<f64>> = match self {
            Self::Zdt1 | Self::Zdt2 => (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    let f2 = if self == Self::Zdt1 { 1.0 - t.sqrt() } else { 1.0 - t * t };
                    vec![t, f2]
                })
                .collect(),
            _ => {
                let golden = (5f64.sqrt() - 1.0) / 2.0;
                (0..n)
                    .map(|i| {
                        let z = (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = (i as f64 * golden).fract() * PI / 2.0;
                        vec![r * phi.cos(), r * phi.sin(), z]
                    })
                    .collect()
            }
        };
        Matrix::from_rows(&rows)
    }
}

/// `f1 = x_0`, `g = 1 + 9 mean(x_1..)`, `f2 = g h(f1/g) - extra(f1)`.
fn zdt(x: &[f64], h: impl Fn(f64) -> f64, extra: impl Fn(f64) -> f64) -> Vec<f64> {
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
    vec![f1, g * h(f1 / g) - extra(f1)]
}

fn dtlz2(x: &[f64], m: usize) -> Vec<f64> {
    let g: f64 = x[m - 1..].iter().map(|v| (v - 0.5).powi(2)).sum();
    (0..m)
        .map(|i| {
            let mut f = 1.0 + g;
            for &xj in &x[..m - 1 - i] {
                f *= (xj * PI / 2.0).cos();
            }
            if i > 0 {
                f *= (x[m - 1 - i] * PI / 2.0).sin();
            }
            f
        })
        .collect()
}

impl fmt::Display for OracleProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

impl ObjectiveEvaluator for OracleProblem {
    fn evaluate(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.len() != self.n_variables() {
            return None;
        }
        match OracleProblem::evaluate(*self, x) {
            EvaluationOutcome::Objectives(f) => Some(f),
            EvaluationOutcome::Infeasible(_) => None,
        }
    }
}

/// Evaluates every row of `x`.
pub fn evaluate_batch(problem: OracleProblem, x: &Matrix) -> Result<Vec<EvaluationOutcome>> {
    if x.cols() != problem.n_variables() {
        return Err(Error::DimensionMismatch { expected: problem.n_variables(), found: x.cols() });
    }
    Ok((0..x.rows()).into_par_iter().map(|i| problem.evaluate(x.row(i))).collect())
}

/// Samples `n` designs, evaluates them, and keeps the feasible rows.
pub fn generate_dataset(problem: OracleProblem, sampler: Sampler, n: usize, seed: u64) -> Result<GeneratedDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("generate_dataset needs n >= 2".into()));
    }
    let bounds = problem.bounds();
    let x = match sampler {
        Sampler::Lhd => latin_hypercube(n, &bounds, seed)?,
        Sampler::Uniform => uniform_random(n, &bounds, seed),
    };
    let outcomes = evaluate_batch(problem, &x)?;
    let kept: Vec<usize> = (0..n).filter(|&i| outcomes[i].objectives().is_some()).collect();
    if kept.is_empty() {
        return Err(Error::AllInfeasible);
    }
    let targets: Vec<&[f64]> = kept.iter().map(|&i| outcomes[i].objectives().unwrap()).collect();
    let dataset = TabularDataset::new(
        problem.feature_names(),
        problem.objective_names(),
        x.select_rows(&kept),
        Matrix::from_rows(&targets)?,
    )?;
    Ok(GeneratedDataset { dataset, dropped_rows: n - kept.len() })
}
