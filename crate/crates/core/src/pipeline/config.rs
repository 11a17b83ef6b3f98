use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moo::{Direction, Nsga2Config};
use crate::oracle::{OracleProblem, Sampler};
use crate::surrogate::{GbtSpace, MlpSpace, SearchSpace};

/// Configuration syntax version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// A surrogate slot of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSlot {
    Gbt,
    Mlp,
    Mlp2,
    Ensemble,
}

impl ModelSlot {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gbt => "gbt",
            Self::Mlp => "mlp",
            Self::Mlp2 => "mlp2",
            Self::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for ModelSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Oracle {
        problem: OracleProblem,
        #[serde(default)]
        sampler: Sampler,
        n: usize,
    },
    Csv {
        path: PathBuf,
        n_feature_columns: usize,
        /// One entry per objective column; all minimize when absent.
        #[serde(default)]
        directions: Option<Vec<Direction>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    #[default]
    Oracle,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub budget: usize,
    pub folds: usize,
    /// Best CV configurations pooled into the ensemble.
    pub ensemble_pool: usize,
    /// Share of the training split held out to learn ensemble weights.
    pub ensemble_holdout: f64,
    pub gbt_space: GbtSpace,
    pub mlp_space: MlpSpace,
    pub mlp2_space: MlpSpace,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            budget: 20,
            folds: 5,
            ensemble_pool: 5,
            ensemble_holdout: 0.2,
            gbt_space: GbtSpace::default(),
            mlp_space: MlpSpace::default(),
            mlp2_space: MlpSpace::deep(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub mutation_rate: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = Nsga2Config::default();
        Self {
            pop_size: d.pop_size,
            generations: d.generations,
            crossover_prob: d.crossover_prob,
            eta_c: d.eta_c,
            eta_m: d.eta_m,
            mutation_rate: d.mutation_rate,
        }
    }
}

impl OptimizerConfig {
    pub fn to_nsga2(&self, seed: u64) -> Nsga2Config {
        Nsga2Config {
            pop_size: self.pop_size,
            generations: self.generations,
            crossover_prob: self.crossover_prob,
            eta_c: self.eta_c,
            eta_m: self.eta_m,
            mutation_rate: self.mutation_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub mode: ValidationMode,
    /// Most candidates sent to the oracle per model.
    pub cap: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { mode: ValidationMode::Oracle, cap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub permutation_repeats: usize,
    pub grid_size: usize,
    pub top_features: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { permutation_repeats: 5, grid_size: crate::xai::DEFAULT_GRID_SIZE, top_features: 3 }
    }
}

/// Whole-pipeline configuration, read from TOML.
///
/// ```toml
/// version = 1
/// seed = 7
/// models = ["gbt", "ensemble", "mlp"]
///
/// [data]
/// source = "oracle"
/// problem = "zdt1"
/// n = 1000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub models: Vec<ModelSlot>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Adds a second cycle that retrains on validated points.
    #[serde(default)]
    pub retrain_cycle: bool,
    pub data: DataSource,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl PipelineConfig {
    /// Default settings for an oracle problem.
    pub fn for_oracle(problem: OracleProblem, n: usize, models: Vec<ModelSlot>, seed: u64) -> Self {
        Self {
            version: CONFIG_VERSION,
            seed,
            test_fraction: default_test_fraction(),
            models,
            output_dir: None,
            retrain_cycle: false,
            data: DataSource::Oracle { problem, sampler: Sampler::Lhd, n },
            tuning: TuningConfig::default(),
            optimizer: OptimizerConfig::default(),
            validation: ValidationConfig::default(),
            explain: ExplainConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative CSV paths resolve against its folder.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Model slots in execution order.
    pub fn ordered_models(&self) -> Vec<ModelSlot> {
        let mut m = self.models.clone();
        m.sort();
        m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.models.is_empty() {
            return bad("at least one model kind is required".into());
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return bad("model kinds must be unique".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        match &self.data {
            DataSource::Oracle { n, .. } if *n < 10 => return bad(format!("oracle sample count {n} below 10")),
            DataSource::Csv { n_feature_columns: 0, .. } => return bad("n_feature_columns must be >= 1".into()),
            DataSource::Csv { .. } if self.validation.mode == ValidationMode::Oracle => {
                return bad("oracle validation needs an oracle data source".into())
            }
            _ => {}
        }
        let t = &self.tuning;
        if t.budget == 0 {
            return bad("tuning budget must be >= 1".into());
        }
        if t.folds < 2 {
            return bad("tuning folds must be >= 2".into());
        }
        if self.models.contains(&ModelSlot::Ensemble) && t.ensemble_pool < 2 {
            return bad("ensemble_pool must be >= 2".into());
        }
        if !(t.ensemble_holdout > 0.0 && t.ensemble_holdout < 1.0) {
            return bad("ensemble_holdout outside (0, 1)".into());
        }
        for space in [
            SearchSpace::Gbt(t.gbt_space.clone()),
            SearchSpace::Mlp(t.mlp_space.clone()),
            SearchSpace::Mlp(t.mlp2_space.clone()),
        ] {
            space.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.optimizer.to_nsga2(self.seed).validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.validation.cap == 0 {
            return bad("validation cap must be >= 1".into());
        }
        let e = &self.explain;
        if e.permutation_repeats == 0 || e.grid_size < 2 || e.top_features == 0 {
            return bad("explain needs repeats >= 1, grid_size >= 2, top_features >= 1".into());
        }
        Ok(())
    }
}
