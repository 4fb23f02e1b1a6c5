use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DataSource;
use crate::error::{Error, Result};
use crate::evaluation::CvKind;
use crate::ga::GaConfig;
use crate::hybrid::HybridConfig;
use crate::objective::{BenchmarkKind, ObjectiveSpec, TrainerConfig};
use crate::pso::PsoConfig;
use crate::search_space::{default_anxiety_space, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Pso,
    Ga,
    Hybrid,
    /// Successive halving over randomly sampled configurations.
    Sh,
    Hyperband,
    /// GA over binary feature masks with fixed trainer settings.
    FeatureSelect,
    /// No search: the trainer settings as configured.
    Fixed,
}

impl std::str::FromStr for OptimizerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::ExperimentConfig(format!("unknown optimizer {s:?}")))
    }
}

impl OptimizerChoice {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerChoice::Pso => "pso",
            OptimizerChoice::Ga => "ga",
            OptimizerChoice::Hybrid => "hybrid",
            OptimizerChoice::Sh => "sh",
            OptimizerChoice::Hyperband => "hyperband",
            OptimizerChoice::FeatureSelect => "feature_select",
            OptimizerChoice::Fixed => "fixed",
        }
    }

    fn is_multifidelity(self) -> bool {
        matches!(self, OptimizerChoice::Sh | OptimizerChoice::Hyperband)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub kind: CvKind,
    pub stratified: bool,
    /// Seed of the subject shuffle; independent of `master_seed` so runs
    /// with different search seeds share one plan.
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: 5,
            kind: CvKind::Kfold,
            stratified: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSettings {
    pub enabled: bool,
    pub k: usize,
    pub target_ratio: f64,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            k: 5,
            target_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiFidelitySettings {
    pub eta: u32,
    pub min_budget: u32,
    pub max_budget: u32,
    /// Candidates for plain successive halving.
    pub n_candidates: usize,
}

impl Default for MultiFidelitySettings {
    fn default() -> Self {
        Self {
            eta: 3,
            min_budget: 1,
            max_budget: 27,
            n_candidates: 27,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    /// Store checkpoints only for budget-laddered optimizers, which resume.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSettings {
    pub enabled: bool,
    /// Defaults to `<output_dir>/cache`.
    pub dir: Option<PathBuf>,
    pub checkpoints: CheckpointPolicy,
}

impl Default for CacheSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            dir: None,
            checkpoints: CheckpointPolicy::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSettings {
    pub function: BenchmarkKind,
    pub dims: usize,
}

/// One experiment, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub optimizer: OptimizerChoice,
    pub master_seed: u64,
    /// Final re-evaluations of the winner with distinct seeds.
    pub repeats: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub data: Option<DataSource>,
    /// Analytic objective instead of training; excludes `data`.
    pub benchmark: Option<BenchmarkSettings>,
    /// Search dimensions; the default anxiety space when absent.
    pub space: Option<SearchSpace>,
    pub cv: CvSettings,
    pub objective: ObjectiveSpec,
    /// Base trainer settings; searched dimensions override them.
    pub trainer: TrainerConfig,
    pub pso: PsoConfig,
    pub ga: GaConfig,
    pub hybrid: HybridConfig,
    pub multifidelity: MultiFidelitySettings,
    pub smote: SmoteSettings,
    pub cache: CacheSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerChoice::Hybrid,
            master_seed: 0,
            repeats: 5,
            workers: 1,
            output_dir: PathBuf::from("runs/default"),
            data: None,
            benchmark: None,
            space: None,
            cv: CvSettings::default(),
            objective: ObjectiveSpec::default(),
            trainer: TrainerConfig::default(),
            pso: PsoConfig::default(),
            ga: GaConfig::default(),
            hybrid: HybridConfig::default(),
            multifidelity: MultiFidelitySettings::default(),
            smote: SmoteSettings::default(),
            cache: CacheSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ExperimentConfig(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a TOML file. Relative CSV paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ExperimentConfig(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(DataSource::Csv { path: p, .. }) = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn search_space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(default_anxiety_space)
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache
            .enabled
            .then(|| self.cache.dir.clone().unwrap_or_else(|| self.output_dir.join("cache")))
    }

    pub fn stores_checkpoints(&self) -> bool {
        match self.cache.checkpoints {
            CheckpointPolicy::Always => true,
            CheckpointPolicy::Never => false,
            CheckpointPolicy::Auto => self.optimizer.is_multifidelity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ExperimentConfig(m));
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        match (&self.data, &self.benchmark) {
            (Some(_), Some(_)) => return bad("set either data or benchmark, not both".into()),
            (None, None) => return bad("no data source and no benchmark".into()),
            (None, Some(b)) => {
                if b.dims == 0 {
                    return bad("benchmark dims must be >= 1".into());
                }
                if !matches!(
                    self.optimizer,
                    OptimizerChoice::Pso | OptimizerChoice::Ga | OptimizerChoice::Hybrid
                ) {
                    return bad(format!("optimizer {} needs a dataset", self.optimizer.name()));
                }
            }
            (Some(DataSource::Csv { path, .. }), None) => {
                if !path.is_file() {
                    return bad(format!("data file {} does not exist", path.display()));
                }
            }
            (Some(_), None) => {}
        }
        self.trainer.validate()?;
        self.objective.validate()?;
        self.pso.validate()?;
        self.ga.validate()?;
        if self.optimizer == OptimizerChoice::Hybrid {
            self.hybrid.validate()?;
        }
        if self.smote.enabled && (self.smote.k == 0 || !(self.smote.target_ratio > 0.0)) {
            return bad("smote needs k >= 1 and target_ratio > 0".into());
        }
        let mf = &self.multifidelity;
        if self.optimizer.is_multifidelity() && (mf.eta < 2 || mf.min_budget == 0 || mf.min_budget > mf.max_budget) {
            return bad("multifidelity needs eta >= 2 and 1 <= min_budget <= max_budget".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            optimizer = "pso"
            master_seed = 7
            repeats = 3
            workers = 2
            output_dir = "out"

            [data]
            source = "synthetic"
            n_subjects = 12
            seed = 3

            [[space]]
            name = "learning_rate"
            kind = "continuous"
            lower = 1e-4
            upper = 1e-2
            scale = "log10"

            [[space]]
            name = "hidden_units"
            kind = "categorical"
            choices = [16, 32]

            [cv]
            k = 3

            [trainer]
            epochs = 4

            [pso]
            swarm_size = 4
            iterations = 2
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.optimizer, OptimizerChoice::Pso);
        assert_eq!(cfg.search_space().len(), 2);
        assert_eq!(cfg.cv.k, 3);
        assert!(cfg.cv.stratified);
        assert_eq!(cfg.pso.iterations, 2);
        assert_eq!(cfg.pso.w, 0.7);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml_str("optimizer = \"annealing\"").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            repeats: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            data: Some(DataSource::Csv {
                path: "/nonexistent/data.csv".into(),
                subject_column: "subject".into(),
                label_column: "label".into(),
            }),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
