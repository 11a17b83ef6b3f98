use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    crowding_distance, fast_non_dominated_sort, non_dominated_indices, orient_row, polynomial_mutation,
    sbx_crossover, Direction, Individual, ObjectiveEvaluator, ParetoFront, ProblemSpec,
};
use crate::dataset::latin_hypercube;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, Rng};

const STREAM_INIT: u64 = 0x1417;
const STREAM_SELECT: u64 = 0x5E1;
const STREAM_VARY: u64 = 0x7A2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Nsga2Config {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    /// Per-gene mutation probability; `None` means `1/d`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 200,
            crossover_prob: 0.9,
            eta_c: 15.0,
            eta_m: 20.0,
            mutation_rate: None,
            seed: 0,
        }
    }
}

impl Nsga2Config {
    /// Population 2000 over 4000 generations, about 8 million evaluations.
    pub fn large_scale(seed: u64) -> Self {
        Self { pop_size: 2000, generations: 4000, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 || !self.pop_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("population {} must be even and >= 4", self.pop_size)));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::InvalidArgument("crossover probability outside [0, 1]".into()));
        }
        if !(self.eta_c >= 0.0 && self.eta_m >= 0.0) {
            return Err(Error::InvalidArgument("distribution indices must be >= 0".into()));
        }
        if let Some(r) = self.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidArgument("mutation rate outside [0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Result {
    pub population: Vec<Individual>,
    /// Feasible non-dominated members of the final population.
    pub front: ParetoFront,
    pub evaluations: usize,
    pub infeasible_evaluations: usize,
    pub directions: Vec<Direction>,
}

impl Nsga2Result {
    /// Front objectives in the problem's own orientation.
    pub fn front_objectives(&self) -> Matrix {
        self.front.objectives(&self.directions)
    }
}

/// Runs NSGA-II with LHD initialization, binary tournaments on
/// (rank, crowding), SBX, polynomial mutation and (mu + lambda) survival.
///
/// Non-finite or failed evaluations are kept but ranked behind every
/// feasible individual.
pub fn nsga2_run(problem: &ProblemSpec, evaluator: &dyn ObjectiveEvaluator, config: &Nsga2Config) -> Result<Nsga2Result> {
    config.validate()?;
    let bounds = &problem.bounds;
    let d = bounds.dim();
    let n = config.pop_size;
    let mutation_rate = config.mutation_rate.unwrap_or(1.0 / d as f64);
    let mut infeasible = 0;

    let init = latin_hypercube(n, bounds, rng::derive_seed(config.seed, &[STREAM_INIT]))?;
    let mut population = evaluate(problem, evaluator, init.to_rows(), &mut infeasible)?;
    assign_rank_and_crowding(&mut population);

    for generation in 0..config.generations {
        let mut select_rng = rng::stream(config.seed, &[STREAM_SELECT, generation as u64]);
        let mut children = Vec::with_capacity(n);
        for pair in 0..n / 2 {
            let a = tournament(&population, &mut select_rng);
            let b = tournament(&population, &mut select_rng);
            let mut vary = rng::stream(config.seed, &[STREAM_VARY, generation as u64, pair as u64]);
            let (mut c1, mut c2) = sbx_crossover(
                &population[a].x,
                &population[b].x,
                config.eta_c,
                config.crossover_prob,
                bounds,
                &mut vary,
            );
            polynomial_mutation(&mut c1, config.eta_m, mutation_rate, bounds, &mut vary);
            polynomial_mutation(&mut c2, config.eta_m, mutation_rate, bounds, &mut vary);
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate(problem, evaluator, children, &mut infeasible)?;
        population.extend(offspring);
        assign_rank_and_crowding(&mut population);
        population = survivors(population, n);
    }

    let feasible: Vec<&Individual> = population.iter().filter(|i| i.feasible).collect();
    let objectives: Vec<&[f64]> = feasible.iter().map(|i| i.objectives.as_slice()).collect();
    let members = non_dominated_indices(&objectives).into_iter().map(|k| feasible[k].clone()).collect();
    Ok(Nsga2Result {
        population,
        front: ParetoFront { members },
        evaluations: n * (config.generations + 1),
        infeasible_evaluations: infeasible,
        directions: problem.directions.clone(),
    })
}

fn evaluate(
    problem: &ProblemSpec,
    evaluator: &dyn ObjectiveEvaluator,
    xs: Vec<Vec<f64>>,
    infeasible: &mut usize,
) -> Result<Vec<Individual>> {
    let m = problem.n_objectives();
    let outcomes = evaluator.evaluate_many(&xs);
    let mut out = Vec::with_capacity(xs.len());
    for (x, outcome) in xs.into_iter().zip(outcomes) {
        let objectives = match outcome {
            Some(f) if f.len() == m && f.iter().all(|v| v.is_finite()) => Some(orient_row(&f, &problem.directions)),
            Some(f) if f.len() != m => return Err(Error::DimensionMismatch { expected: m, found: f.len() }),
            _ => None,
        };
        let feasible = objectives.is_some();
        if !feasible {
            *infeasible += 1;
        }
        out.push(Individual {
            x,
            objectives: objectives.unwrap_or_else(|| vec![f64::INFINITY; m]),
            feasible,
            rank: 0,
            crowding: 0.0,
        });
    }
    Ok(out)
}

fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].feasible).collect();
    let objectives: Vec<&[f64]> = feasible.iter().map(|&i| pop[i].objectives.as_slice()).collect();
    let fronts = fast_non_dominated_sort(&objectives);
    let worst = fronts.len();
    let mut updates = Vec::with_capacity(pop.len());
    for (rank, front) in fronts.iter().enumerate() {
        let dist = crowding_distance(&objectives, front);
        for (k, &local) in front.iter().enumerate() {
            updates.push((feasible[local], rank, dist[k]));
        }
    }
    for ind in pop.iter_mut().filter(|i| !i.feasible) {
        ind.rank = worst;
        ind.crowding = 0.0;
    }
    for (i, rank, crowding) in updates {
        pop[i].rank = rank;
        pop[i].crowding = crowding;
    }
}

/// Better rank first, then larger crowding distance, then original order.
fn better(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    a.rank.cmp(&b.rank).then(b.crowding.total_cmp(&a.crowding))
}

fn tournament(pop: &[Individual], rng: &mut Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if better(&pop[b], &pop[a]).is_lt() {
        b
    } else {
        a
    }
}

fn survivors(pop: Vec<Individual>, n: usize) -> Vec<Individual> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| better(&pop[a], &pop[b]).then(a.cmp(&b)));
    order.truncate(n);
    order.sort_unstable();
    let mut keep = vec![false; pop.len()];
    for &i in &order {
        keep[i] = true;
    }
    pop.into_iter().zip(keep).filter_map(|(ind, k)| k.then_some(ind)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureBounds;
    use crate::moo::dominates;

    fn schaffer() -> ProblemSpec {
        ProblemSpec::new(
            FeatureBounds::uniform(1, -5.0, 5.0).unwrap(),
            vec!["f1".into(), "f2".into()],
            vec![Direction::Minimize; 2],
        )
        .unwrap()
    }

    fn schaffer_eval(x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![x[0] * x[0], (x[0] - 2.0).powi(2)])
    }

    #[test]
    fn converges_to_analytic_front() {
        let cfg = Nsga2Config { pop_size: 40, generations: 50, seed: 3, ..Default::default() };
        let r = nsga2_run(&schaffer(), &schaffer_eval, &cfg).unwrap();
        assert!(!r.front.is_empty());
        let f = r.front_objectives();
        for row in f.iter_rows() {
            let (f1, f2) = (row[0], row[1]);
            assert!((-1e-2..=4.0 + 1e-2).contains(&f1), "f1 {f1}");
            let expected = (f1.max(0.0).sqrt() - 2.0).powi(2);
            assert!((f2 - expected).abs() < 1e-2, "({f1}, {f2})");
        }
    }

    #[test]
    fn zero_generations_returns_initial_population() {
        let cfg = Nsga2Config { pop_size: 8, generations: 0, seed: 1, ..Default::default() };
        let r = nsga2_run(&schaffer(), &schaffer_eval, &cfg).unwrap();
        assert_eq!(r.evaluations, 8);
        assert_eq!(r.population.len(), 8);
        let init = latin_hypercube(8, &schaffer().bounds, rng::derive_seed(1, &[STREAM_INIT])).unwrap();
        for (ind, row) in r.population.iter().zip(init.iter_rows()) {
            assert_eq!(ind.x, row);
        }
    }

    #[test]
    fn odd_or_tiny_population_rejected() {
        for pop_size in [2, 5] {
            let cfg = Nsga2Config { pop_size, ..Default::default() };
            assert!(nsga2_run(&schaffer(), &schaffer_eval, &cfg).is_err());
        }
    }

    #[test]
    fn non_finite_outputs_are_demoted() {
        let eval = |x: &[f64]| -> Option<Vec<f64>> {
            if x[0] > 3.0 {
                Some(vec![f64::NAN, 0.0])
            } else if x[0] < -3.0 {
                None
            } else {
                schaffer_eval(x)
            }
        };
        let cfg = Nsga2Config { pop_size: 20, generations: 10, seed: 5, ..Default::default() };
        let r = nsga2_run(&schaffer(), &eval, &cfg).unwrap();
        assert!(r.infeasible_evaluations > 0);
        assert!(r.front.members.iter().all(|m| m.feasible && m.x[0].abs() <= 3.0));
        let worst_feasible = r.population.iter().filter(|i| i.feasible).map(|i| i.rank).max().unwrap_or(0);
        assert!(r.population.iter().filter(|i| !i.feasible).all(|i| i.rank > worst_feasible));
    }

    #[test]
    fn maximize_objectives_are_reported_unflipped() {
        let spec = ProblemSpec::new(
            FeatureBounds::uniform(1, 0.0, 1.0).unwrap(),
            vec!["gain".into(), "cost".into()],
            vec![Direction::Maximize, Direction::Minimize],
        )
        .unwrap();
        let eval = |x: &[f64]| Some(vec![x[0], x[0] * x[0]]);
        let cfg = Nsga2Config { pop_size: 12, generations: 5, seed: 2, ..Default::default() };
        let r = nsga2_run(&spec, &eval, &cfg).unwrap();
        let f = r.front_objectives();
        for (row, m) in f.iter_rows().zip(&r.front.members) {
            assert_eq!(row[0], m.x[0]);
            assert_eq!(m.objectives[0], -m.x[0]);
        }
    }

    #[test]
    fn deterministic_and_front_non_dominated() {
        let cfg = Nsga2Config { pop_size: 16, generations: 15, seed: 8, ..Default::default() };
        let a = nsga2_run(&schaffer(), &schaffer_eval, &cfg).unwrap();
        let b = nsga2_run(&schaffer(), &schaffer_eval, &cfg).unwrap();
        assert_eq!(a, b);
        for p in &a.front.members {
            assert!(!a.front.members.iter().any(|q| dominates(&q.objectives, &p.objectives)));
        }
        assert!(a.population.iter().all(|i| schaffer().bounds.contains(&i.x)));
    }
}
