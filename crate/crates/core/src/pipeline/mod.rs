//! The end-to-end loop: acquire data, tune and train surrogates, explain
//! them, optimize on each surrogate, validate the predicted fronts on the
//! oracle and score them against the database.

mod config;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    DataSource, ExplainConfig, ModelSlot, OptimizerConfig, PipelineConfig, TuningConfig, ValidationConfig,
    ValidationMode, CONFIG_VERSION,
};
pub use validate::{
    front_candidates, select_candidates, thin_by_nearest_neighbor, validate_candidates, Candidate,
    ValidatedCandidate, ValidationOutcome,
};

use crate::dataset::{load_csv, split, write_csv, TabularDataset};
use crate::error::{Error, Result};
use crate::indicators::{compare_runs, write_indicators_csv, IndicatorRow, RunFront};
use crate::matrix::Matrix;
use crate::moo::{nsga2_run, Direction, ProblemSpec};
use crate::oracle::{generate_dataset, OracleProblem};
use crate::rng::derive_seed;
use crate::surrogate::{
    evaluate, train_ensemble, EnsembleModel, Hyperparameters, SearchSpace, TrainedSurrogate, TrialRecord,
    TuneResult,
};
use crate::xai::{
    importance_rows, partial_dependence, permutation_importance, surrogate_gain_importance, write_importances_csv,
    write_pdp_csv, ImportanceRow, ImportanceVector, PdpCurve,
};

/// Version of the `report.json` layout.
pub const REPORT_FORMAT_VERSION: u32 = 1;

const TAG_DATA: u64 = 0xDA7A;
const TAG_SPLIT: u64 = 0x5B17;
const TAG_TUNE: u64 = 0x7E4E;
const TAG_TRAIN: u64 = 0x74A1;
const TAG_ENSEMBLE: u64 = 0xE45B;
const TAG_EXPLAIN: u64 = 0xE8A1;
const TAG_OPTIMIZE: u64 = 0x0971;
const TAG_RETRAIN: u64 = 0x2E72;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Acquire,
    Split,
    Train,
    Explain,
    Optimize,
    Validate,
    Indicators,
    Retrain,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Acquire => "acquire",
            Self::Split => "split",
            Self::Train => "train",
            Self::Explain => "explain",
            Self::Optimize => "optimize",
            Self::Validate => "validate",
            Self::Indicators => "indicators",
            Self::Retrain => "retrain",
            Self::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failed run: the stage, the cause, and the report of finished stages.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
    pub partial: Box<RunReport>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: String,
    pub rows: usize,
    pub dropped_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub target: String,
    pub mape: f64,
    pub mse: f64,
    pub excluded_zero_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub family: ModelSlot,
    pub trial: usize,
    pub cv_score: f64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleInfo {
    pub members: Vec<EnsembleMember>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub front_size: usize,
    pub evaluations: usize,
    pub infeasible_evaluations: usize,
    pub predicted_front_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub candidates: usize,
    pub validated: usize,
    pub dropped: usize,
    pub simulation_rate: f64,
    pub all_infeasible: bool,
    pub mape: Vec<Option<f64>>,
    pub validated_front_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: String,
    pub slot: ModelSlot,
    pub hyperparameters: Option<Hyperparameters>,
    pub cv_score: Option<f64>,
    pub tuning: Vec<TrialRecord>,
    pub ensemble: Option<EnsembleInfo>,
    pub metrics: Vec<MetricSummary>,
    pub metrics_path: String,
    pub residuals_path: String,
    pub model_path: String,
    pub optimization: Option<OptimizationSummary>,
    pub validation: Option<ValidationSummary>,
    pub indicator: Option<IndicatorRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config_version: u32,
    pub config: PipelineConfig,
    pub dataset: Option<DatasetInfo>,
    pub models: Vec<ModelReport>,
    pub retrain_cycle: Vec<ModelReport>,
    pub importances_path: Option<String>,
    pub pdp_paths: Vec<String>,
    pub indicators: Vec<IndicatorRow>,
    pub indicators_path: Option<String>,
    pub completed_stages: Vec<Stage>,
    pub failure: Option<StageFailure>,
    /// Wall-clock seconds per stage; the only non-deterministic field.
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    fn new(config: &PipelineConfig) -> Self {
        let mut config = config.clone();
        config.output_dir = None;
        Self {
            format_version: REPORT_FORMAT_VERSION,
            config_version: config.version,
            config,
            dataset: None,
            models: Vec::new(),
            retrain_cycle: Vec::new(),
            importances_path: None,
            pdp_paths: Vec::new(),
            indicators: Vec::new(),
            indicators_path: None,
            completed_stages: Vec::new(),
            failure: None,
            timing: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Writes `report.json` into `dir`.
pub fn emit_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = dir.as_ref().join("report.json");
    std::fs::write(&path, report.to_json()? + "\n")?;
    Ok(path)
}

/// Runs every stage.
pub fn run(config: &PipelineConfig, out: impl AsRef<Path>) -> Result<RunReport, PipelineError> {
    run_until(config, out, Stage::Report)
}

/// Runs stages in order up to and including `last`, then writes the
/// report. Stages that do not apply to the configuration are skipped.
pub fn run_until(config: &PipelineConfig, out: impl AsRef<Path>, last: Stage) -> Result<RunReport, PipelineError> {
    let mut runner = Runner::new(config, out.as_ref());
    let result = runner.execute(last);
    match result {
        Ok(()) => Ok(runner.report),
        Err((stage, source)) => {
            runner.report.failure = Some(StageFailure { stage, message: source.to_string() });
            if stage != Stage::Config {
                let _ = emit_report(&runner.report, &runner.out);
            }
            Err(PipelineError { stage, source, partial: Box::new(runner.report) })
        }
    }
}

struct Trained {
    slot: ModelSlot,
    label: String,
    model: TrainedSurrogate,
    hyperparameters: Option<Hyperparameters>,
}

struct Runner<'a> {
    config: &'a PipelineConfig,
    out: PathBuf,
    report: RunReport,
    data: Option<TabularDataset>,
    train: Option<TabularDataset>,
    test: Option<TabularDataset>,
    tuned: BTreeMap<ModelSlot, TuneResult>,
    models: Vec<Trained>,
    candidates: Vec<Vec<Candidate>>,
    outcomes: Vec<Option<ValidationOutcome>>,
}

type StageResult<T = ()> = std::result::Result<T, (Stage, Error)>;

fn at(stage: Stage) -> impl FnOnce(Error) -> (Stage, Error) {
    move |e| (stage, e)
}

impl<'a> Runner<'a> {
    fn new(config: &'a PipelineConfig, out: &Path) -> Self {
        Self {
            config,
            out: out.to_path_buf(),
            report: RunReport::new(config),
            data: None,
            train: None,
            test: None,
            tuned: BTreeMap::new(),
            models: Vec::new(),
            candidates: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    fn oracle(&self) -> Option<OracleProblem> {
        match self.config.data {
            DataSource::Oracle { problem, .. } => Some(problem),
            DataSource::Csv { .. } => None,
        }
    }

    fn validating(&self) -> bool {
        self.config.validation.mode == ValidationMode::Oracle && self.oracle().is_some()
    }

    fn execute(&mut self, last: Stage) -> StageResult {
        self.config.validate().map_err(at(Stage::Config))?;
        std::fs::create_dir_all(&self.out).map_err(|e| (Stage::Report, e.into()))?;
        self.report.completed_stages.push(Stage::Config);
        let stages = [
            Stage::Acquire,
            Stage::Split,
            Stage::Train,
            Stage::Explain,
            Stage::Optimize,
            Stage::Validate,
            Stage::Indicators,
            Stage::Retrain,
        ];
        for stage in stages.into_iter().filter(|&s| s <= last) {
            let skip = match stage {
                Stage::Validate | Stage::Indicators => !self.validating(),
                Stage::Retrain => !(self.validating() && self.config.retrain_cycle),
                _ => false,
            };
            if skip {
                continue;
            }
            let start = Instant::now();
            match stage {
                Stage::Acquire => self.acquire(),
                Stage::Split => self.split(),
                Stage::Train => self.train_models(),
                Stage::Explain => self.explain(),
                Stage::Optimize => self.optimize(),
                Stage::Validate => self.validate(),
                Stage::Indicators => self.indicators(),
                Stage::Retrain => self.retrain(),
                _ => unreachable!(),
            }
            .map_err(at(stage))?;
            self.report.timing.insert(stage.name().to_string(), start.elapsed().as_secs_f64());
            self.report.completed_stages.push(stage);
        }
        emit_report(&self.report, &self.out).map_err(at(Stage::Report))?;
        self.report.completed_stages.push(Stage::Report);
        emit_report(&self.report, &self.out).map_err(at(Stage::Report))?;
        Ok(())
    }

    fn acquire(&mut self) -> Result<()> {
        let (data, dropped, source) = match &self.config.data {
            DataSource::Oracle { problem, sampler, n } => {
                let g = generate_dataset(*problem, *sampler, *n, derive_seed(self.config.seed, &[TAG_DATA]))?;
                (g.dataset, g.dropped_rows, format!("oracle:{problem}"))
            }
            DataSource::Csv { path, n_feature_columns, directions } => {
                let loaded = load_csv(path, *n_feature_columns)?;
                if let Some(d) = directions {
                    if d.len() != loaded.dataset.n_targets() {
                        return Err(Error::Config(format!(
                            "{} directions for {} objective columns",
                            d.len(),
                            loaded.dataset.n_targets()
                        )));
                    }
                }
                (loaded.dataset, loaded.dropped_rows, format!("csv:{}", path.display()))
            }
        };
        if data.n_targets() < 2 {
            return Err(Error::InvalidDataset("need at least two objective columns".into()));
        }
        write_csv(&data, self.out.join("dataset.csv"))?;
        self.report.dataset = Some(DatasetInfo {
            source,
            rows: data.n_rows(),
            dropped_rows: dropped,
            train_rows: 0,
            test_rows: 0,
            feature_names: data.feature_names().to_vec(),
            target_names: data.target_names().to_vec(),
            path: "dataset.csv".into(),
        });
        self.data = Some(data);
        Ok(())
    }

    fn split(&mut self) -> Result<()> {
        let data = self.data.as_ref().expect("acquired");
        let (train, test) = split(data, self.config.test_fraction, derive_seed(self.config.seed, &[TAG_SPLIT]))?;
        let info = self.report.dataset.as_mut().expect("acquired");
        info.train_rows = train.n_rows();
        info.test_rows = test.n_rows();
        self.train = Some(train);
        self.test = Some(test);
        Ok(())
    }

    fn space(&self, family: ModelSlot) -> SearchSpace {
        let t = &self.config.tuning;
        match family {
            ModelSlot::Gbt => SearchSpace::Gbt(t.gbt_space.clone()),
            ModelSlot::Mlp => SearchSpace::Mlp(t.mlp_space.clone()),
            ModelSlot::Mlp2 => SearchSpace::Mlp(t.mlp2_space.clone()),
            ModelSlot::Ensemble => unreachable!("the ensemble has no search space"),
        }
    }

    fn tuned(&mut self, family: ModelSlot) -> Result<&TuneResult> {
        if !self.tuned.contains_key(&family) {
            let t = &self.config.tuning;
            let seed = derive_seed(self.config.seed, &[TAG_TUNE, family as u64]);
            let result =
                crate::surrogate::tune(self.train.as_ref().expect("split"), &self.space(family), t.budget, t.folds, seed)?;
            self.tuned.insert(family, result);
        }
        Ok(&self.tuned[&family])
    }

    fn train_models(&mut self) -> Result<()> {
        for slot in self.config.ordered_models() {
            let seed = derive_seed(self.config.seed, &[TAG_TRAIN, slot as u64]);
            let (model, report) = if slot == ModelSlot::Ensemble {
                self.train_ensemble_slot(seed)?
            } else {
                let tuned = self.tuned(slot)?.clone();
                let mut model = TrainedSurrogate::train(self.train.as_ref().expect("split"), &tuned.best, seed)?;
                model.record.cv_score = Some(tuned.best_score);
                let report = self.model_report(slot, slot.name(), Some(tuned.best.clone()), Some(tuned.best_score), tuned.trials);
                (model, report)
            };
            let report = self.finish_training(&model, report)?;
            self.report.models.push(report);
            let hyperparameters = model.record.hyperparameters.clone();
            self.models.push(Trained { slot, label: slot.name().to_string(), model, hyperparameters });
        }
        Ok(())
    }

    fn model_report(
        &self,
        slot: ModelSlot,
        label: &str,
        hyperparameters: Option<Hyperparameters>,
        cv_score: Option<f64>,
        tuning: Vec<TrialRecord>,
    ) -> ModelReport {
        ModelReport {
            label: label.to_string(),
            slot,
            hyperparameters,
            cv_score,
            tuning,
            ensemble: None,
            metrics: Vec::new(),
            metrics_path: format!("metrics_{label}.csv"),
            residuals_path: format!("residuals_{label}.csv"),
            model_path: format!("model_{label}.json"),
            optimization: None,
            validation: None,
            indicator: None,
        }
    }

    /// Pools the best CV configurations of the GBT and MLP searches, learns
    /// simplex weights on a holdout carved from the training split, then
    /// refits the members on the whole training split.
    fn train_ensemble_slot(&mut self, seed: u64) -> Result<(TrainedSurrogate, ModelReport)> {
        let mut pool: Vec<EnsembleMember> = Vec::new();
        for family in [ModelSlot::Gbt, ModelSlot::Mlp] {
            for t in &self.tuned(family)?.trials {
                if let Some(score) = t.cv_score {
                    pool.push(EnsembleMember {
                        family,
                        trial: t.index,
                        cv_score: score,
                        hyperparameters: t.hyperparameters.clone(),
                    });
                }
            }
        }
        pool.sort_by(|a, b| a.cv_score.total_cmp(&b.cv_score).then(a.family.cmp(&b.family)).then(a.trial.cmp(&b.trial)));
        pool.truncate(self.config.tuning.ensemble_pool);
        if pool.len() < 2 {
            return Err(Error::TrainingFailed("ensemble pool needs two successful trials".into()));
        }
        let train = self.train.as_ref().expect("split");
        let (fit, holdout) = split(train, self.config.tuning.ensemble_holdout, derive_seed(seed, &[TAG_ENSEMBLE]))?;
        let fit_members = |data: &TabularDataset| {
            pool.par_iter()
                .enumerate()
                .map(|(i, m)| TrainedSurrogate::train(data, &m.hyperparameters, derive_seed(seed, &[i as u64])))
                .collect::<Result<Vec<_>>>()
        };
        let learned = train_ensemble(fit_members(&fit)?, &holdout)?;
        let weights = learned.weights.clone();
        let full = fit_members(train)?;
        let (members, kept): (Vec<TrainedSurrogate>, Vec<f64>) =
            full.into_iter().zip(&weights).filter(|(_, &w)| w > 0.0).map(|(m, &w)| (m, w)).unzip();
        let model = TrainedSurrogate::from_ensemble(EnsembleModel { members, weights: kept }, seed)?;
        let mut report = self.model_report(ModelSlot::Ensemble, "ensemble", None, None, Vec::new());
        report.ensemble = Some(EnsembleInfo { members: pool, weights });
        Ok((model, report))
    }

    fn finish_training(&self, model: &TrainedSurrogate, mut report: ModelReport) -> Result<ModelReport> {
        let metrics = evaluate(model, self.test.as_ref().expect("split"))?;
        write_rows(
            &self.out.join(&report.metrics_path),
            &["target", "mape", "mse", "excluded_zero_targets"],
            metrics.iter().map(|m| {
                vec![m.target.clone(), m.mape.to_string(), m.mse.to_string(), m.excluded_zero_targets.to_string()]
            }),
        )?;
        write_rows(
            &self.out.join(&report.residuals_path),
            &["target", "index", "residual"],
            metrics.iter().flat_map(|m| {
                m.residuals.iter().enumerate().map(|(i, r)| vec![m.target.clone(), i.to_string(), r.to_string()])
            }),
        )?;
        model.save(self.out.join(&report.model_path))?;
        report.metrics = metrics
            .into_iter()
            .map(|m| MetricSummary {
                target: m.target,
                mape: m.mape,
                mse: m.mse,
                excluded_zero_targets: m.excluded_zero_targets,
            })
            .collect();
        Ok(report)
    }

    fn explain(&mut self) -> Result<()> {
        let train = self.train.as_ref().expect("split");
        let test = self.test.as_ref().expect("split");
        let cfg = &self.config.explain;
        let mut rows: Vec<ImportanceRow> = Vec::new();
        let mut top: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); train.n_targets()];
        for (k, m) in self.models.iter().enumerate() {
            let gains = surrogate_gain_importance(&m.model).ok();
            for t in 0..train.n_targets() {
                let target = &train.target_names()[t];
                let seed = derive_seed(self.config.seed, &[TAG_EXPLAIN, k as u64, t as u64]);
                let perm = permutation_importance(&m.model, test, t, cfg.permutation_repeats, seed)?;
                let ranking_source: &ImportanceVector = match &gains {
                    Some(g) => {
                        rows.extend(importance_rows(&m.label, target, train.feature_names(), &g[t]));
                        &g[t]
                    }
                    None => &perm,
                };
                top[t].extend(ranking_source.ranking().into_iter().take(cfg.top_features));
                rows.extend(importance_rows(&m.label, target, train.feature_names(), &perm));
            }
        }
        write_importances_csv(&rows, self.out.join("importances.csv"))?;
        self.report.importances_path = Some("importances.csv".into());

        let features: BTreeSet<usize> = top.iter().flatten().copied().collect();
        let mut curves: BTreeMap<(usize, usize), PdpCurve> = BTreeMap::new();
        for (k, m) in self.models.iter().enumerate() {
            for &j in &features {
                curves.insert((k, j), partial_dependence(&m.model, train, &[j], cfg.grid_size)?);
            }
        }
        for (t, set) in top.iter().enumerate() {
            for &j in set {
                let name = format!("pdp_{}_{}.csv", train.target_names()[t], train.feature_names()[j]);
                let responses: Vec<(String, Vec<f64>)> = (0..self.models.len())
                    .map(|k| (self.models[k].label.clone(), curves[&(k, j)].response[t].clone()))
                    .collect();
                write_pdp_csv(&curves[&(0, j)].grid[0], &responses, self.out.join(&name))?;
                self.report.pdp_paths.push(name);
            }
        }
        Ok(())
    }

    fn problem_spec(&self) -> Result<ProblemSpec> {
        match &self.config.data {
            DataSource::Oracle { problem, .. } => Ok(problem.spec()),
            DataSource::Csv { directions, .. } => {
                let data = self.data.as_ref().expect("acquired");
                let dirs = directions.clone().unwrap_or_else(|| vec![Direction::Minimize; data.n_targets()]);
                ProblemSpec::new(data.feature_bounds(), data.target_names().to_vec(), dirs)
            }
        }
    }

    fn optimize(&mut self) -> Result<()> {
        let spec = self.problem_spec()?;
        self.candidates.clear();
        for k in 0..self.models.len() {
            let (label, cands, summary) = self.optimize_one(&spec, k, &[])?;
            debug_assert_eq!(label, self.report.models[k].label);
            self.report.models[k].optimization = Some(summary);
            self.candidates.push(cands);
        }
        Ok(())
    }

    fn optimize_one(&self, spec: &ProblemSpec, k: usize, salt: &[u64]) -> Result<(String, Vec<Candidate>, OptimizationSummary)> {
        let m = &self.models[k];
        let mut path = vec![TAG_OPTIMIZE, m.slot as u64];
        path.extend_from_slice(salt);
        let nsga = self.config.optimizer.to_nsga2(derive_seed(self.config.seed, &path));
        let result = nsga2_run(spec, &m.model, &nsga)?;
        let cands = front_candidates(&result.front, &spec.directions);
        let file = format!("front_predicted_{}.csv", m.label);
        let mut header = vec!["id".to_string()];
        header.extend(spec_feature_names(self, spec));
        header.extend(spec.objective_names.iter().map(|n| format!("pred_{n}")));
        write_rows(
            &self.out.join(&file),
            &header,
            cands.iter().map(|c| {
                let mut row = vec![c.id.to_string()];
                row.extend(c.x.iter().chain(&c.predicted).map(f64::to_string));
                row
            }),
        )?;
        let summary = OptimizationSummary {
            front_size: cands.len(),
            evaluations: result.evaluations,
            infeasible_evaluations: result.infeasible_evaluations,
            predicted_front_path: file,
        };
        Ok((m.label.clone(), cands, summary))
    }

    fn validate(&mut self) -> Result<()> {
        self.outcomes.clear();
        for k in 0..self.models.len() {
            let (outcome, summary) = self.validate_one(k)?;
            self.report.models[k].validation = Some(summary);
            self.outcomes.push(outcome);
        }
        Ok(())
    }

    fn validate_one(&self, k: usize) -> Result<(Option<ValidationOutcome>, ValidationSummary)> {
        let problem = self.oracle().expect("oracle source");
        let label = &self.models[k].label;
        let file = format!("front_validated_{label}.csv");
        let selected = select_candidates(self.candidates[k].clone(), self.config.validation.cap);
        let names = problem.objective_names();
        let mut header = vec!["id".to_string()];
        header.extend(problem.feature_names());
        header.extend(names.iter().map(|n| format!("pred_{n}")));
        header.extend(names.iter().map(|n| format!("val_{n}")));
        if selected.is_empty() {
            write_rows(&self.out.join(&file), &header, std::iter::empty())?;
            let summary = ValidationSummary {
                candidates: 0,
                validated: 0,
                dropped: 0,
                simulation_rate: 0.0,
                all_infeasible: true,
                mape: vec![None; names.len()],
                validated_front_path: file,
            };
            return Ok((None, summary));
        }
        let outcome = validate_candidates(&selected, problem, &names)?;
        write_rows(
            &self.out.join(&file),
            &header,
            outcome.validated.iter().map(|c| {
                let mut row = vec![c.id.to_string()];
                row.extend(c.x.iter().chain(&c.predicted).chain(&c.validated).map(f64::to_string));
                row
            }),
        )?;
        let summary = ValidationSummary {
            candidates: outcome.candidates,
            validated: outcome.validated.len(),
            dropped: outcome.dropped,
            simulation_rate: outcome.simulation_rate,
            all_infeasible: outcome.all_infeasible,
            mape: outcome.mape.clone(),
            validated_front_path: file,
        };
        Ok((Some(outcome), summary))
    }

    fn run_fronts(&self, reports: &[ModelReport], outcomes: &[Option<ValidationOutcome>]) -> Vec<RunFront> {
        let m = self.data.as_ref().expect("acquired").n_targets();
        reports
            .iter()
            .zip(outcomes)
            .map(|(r, o)| RunFront {
                label: r.label.clone(),
                validated: o.as_ref().map_or_else(|| Matrix::zeros(0, m), |o| o.validated_objectives(m)),
                simulation_rate: r.validation.as_ref().map(|v| v.simulation_rate),
            })
            .collect()
    }

    fn indicators(&mut self) -> Result<()> {
        let data = self.data.as_ref().expect("acquired");
        let spec = self.problem_spec()?;
        let runs = self.run_fronts(&self.report.models, &self.outcomes);
        let rows = compare_runs(&runs, data.targets(), &spec.directions)?;
        for (report, row) in self.report.models.iter_mut().zip(&rows[1..]) {
            report.indicator = Some(row.clone());
        }
        self.write_indicators(rows)
    }

    fn write_indicators(&mut self, rows: Vec<IndicatorRow>) -> Result<()> {
        write_indicators_csv(&rows, self.out.join("indicators.csv"))?;
        self.report.indicators = rows;
        self.report.indicators_path = Some("indicators.csv".into());
        Ok(())
    }

    /// Second cycle: each surrogate is refit on the training split plus its
    /// own validated points, then optimized and validated again.
    fn retrain(&mut self) -> Result<()> {
        let spec = self.problem_spec()?;
        let train = self.train.clone().expect("split");
        let first = self.models.len();
        for k in 0..first {
            let Some(outcome) = self.outcomes[k].clone() else { continue };
            let extra = TabularDataset::new(
                train.feature_names().to_vec(),
                train.target_names().to_vec(),
                Matrix::from_rows(&outcome.validated.iter().map(|c| c.x.clone()).collect::<Vec<_>>())?,
                outcome.validated_objectives(train.n_targets()),
            )?;
            let augmented = train.concat(&extra)?;
            let slot = self.models[k].slot;
            let label = format!("{}_retrain", slot.name());
            let seed = derive_seed(self.config.seed, &[TAG_RETRAIN, slot as u64]);
            let model = match (&self.models[k].model.predictor, &self.models[k].hyperparameters) {
                (crate::surrogate::Predictor::Ensemble { model }, _) => {
                    let members = model
                        .members
                        .par_iter()
                        .enumerate()
                        .map(|(i, m)| {
                            let hp = m.record.hyperparameters.clone().expect("members are trained models");
                            TrainedSurrogate::train(&augmented, &hp, derive_seed(seed, &[i as u64]))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    TrainedSurrogate::from_ensemble(EnsembleModel { members, weights: model.weights.clone() }, seed)?
                }
                (_, Some(hp)) => TrainedSurrogate::train(&augmented, hp, seed)?,
                (_, None) => return Err(Error::TrainingFailed(format!("{label}: no hyperparameters"))),
            };
            let report = self.model_report(slot, &label, self.models[k].hyperparameters.clone(), None, Vec::new());
            let report = self.finish_training(&model, report)?;
            self.report.retrain_cycle.push(report);
            self.models.push(Trained { slot, label, model, hyperparameters: self.models[k].hyperparameters.clone() });
        }
        let mut second = Vec::new();
        for k in first..self.models.len() {
            let (_, cands, summary) = self.optimize_one(&spec, k, &[1])?;
            self.report.retrain_cycle[k - first].optimization = Some(summary);
            self.candidates.push(cands);
            let (outcome, v) = self.validate_one(k)?;
            self.report.retrain_cycle[k - first].validation = Some(v);
            second.push(outcome);
        }
        let mut reports = self.report.models.clone();
        reports.extend(self.report.retrain_cycle.iter().cloned());
        let mut outcomes = self.outcomes.clone();
        outcomes.extend(second);
        let runs = self.run_fronts(&reports, &outcomes);
        let rows = compare_runs(&runs, self.data.as_ref().expect("acquired").targets(), &spec.directions)?;
        for (report, row) in self.report.retrain_cycle.iter_mut().zip(&rows[1 + first..]) {
            report.indicator = Some(row.clone());
        }
        self.write_indicators(rows)
    }
}

fn spec_feature_names(runner: &Runner<'_>, spec: &ProblemSpec) -> Vec<String> {
    match &runner.data {
        Some(d) => d.feature_names().to_vec(),
        None => (0..spec.bounds.dim()).map(|j| format!("x_{j}")).collect(),
    }
}

fn write_rows<S: AsRef<str>>(
    path: &Path,
    header: &[S],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}
