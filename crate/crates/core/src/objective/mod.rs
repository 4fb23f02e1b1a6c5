//! The black-box objective: a small feed-forward classifier trained under a
//! decoded configuration and scored on a held-out split.

mod benchmark;
mod checkpoint;
mod loss;
mod nn;

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_weights, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::evaluation::{auc, binary_metrics, MetricsReport};
use crate::ga::FeatureMask;
use crate::search_space::{Configuration, Value};
use crate::seed::derive_seed;

pub use benchmark::{benchmark, BenchmarkKind};
pub use checkpoint::Checkpoint;
pub use loss::{loss, LossKind};
pub use nn::{Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
    #[serde(rename = "adamw")]
    AdamW,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Training hyperparameters for one run of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub loss: LossKind,
    pub optimizer_kind: OptimizerKind,
    pub weight_decay: f64,
    pub epochs: u32,
    pub seed: u64,
    /// Focusing parameter of the focal loss.
    pub focal_gamma: f64,
    /// Probability cut-off for the positive class.
    pub threshold: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            dropout: 0.4,
            hidden_units: 128,
            num_layers: 2,
            loss: LossKind::WeightedBce,
            optimizer_kind: OptimizerKind::Adam,
            weight_decay: 0.0,
            epochs: 20,
            seed: 0,
            focal_gamma: 2.0,
            threshold: 0.5,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidBudget("epochs must be >= 1".into()));
        }
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size == 0 || self.hidden_units == 0 || self.num_layers == 0 {
            return bad("batch_size, hidden_units and num_layers must be >= 1".into());
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.focal_gamma.is_finite() && self.focal_gamma >= 0.0) {
            return bad(format!("focal_gamma must be >= 0, got {}", self.focal_gamma));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must be in (0, 1), got {}", self.threshold));
        }
        Ok(())
    }

    /// Overrides fields named in `cfg`. Assignments that are not trainer
    /// fields (such as `attention_heads` or feature-mask bits) are ignored.
    pub fn with_configuration(&self, cfg: &Configuration) -> Result<Self> {
        let mut out = self.clone();
        let num = |name: &str| -> Result<Option<f64>> {
            match cfg.get(name) {
                None => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::InvalidConfig(format!("{name} must be numeric, got {v}"))),
            }
        };
        let count = |name: &str| -> Result<Option<usize>> {
            match num(name)? {
                Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
                Some(v) => Err(Error::InvalidConfig(format!("{name} must be a whole number, got {v}"))),
                None => Ok(None),
            }
        };
        if let Some(v) = num("learning_rate")? {
            out.learning_rate = v;
        }
        if let Some(v) = count("batch_size")? {
            out.batch_size = v;
        }
        if let Some(v) = num("dropout")? {
            out.dropout = v;
        }
        if let Some(v) = count("hidden_units")? {
            out.hidden_units = v;
        }
        if let Some(v) = count("num_layers")? {
            out.num_layers = v;
        }
        if let Some(v) = num("weight_decay")? {
            out.weight_decay = v;
        }
        if let Some(v) = cfg.get("optimizer_kind") {
            out.optimizer_kind = parse_text(v)?;
        }
        if let Some(v) = cfg.get("loss") {
            out.loss = parse_text(v)?;
        }
        out.validate()?;
        Ok(out)
    }
}

fn parse_text<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::InvalidConfig(format!("expected a name, got {v}")))?;
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidConfig(format!("unknown option {s:?}")))
}

fn step(cfg: &TrainerConfig, ckpt: &mut Checkpoint, grads: &[Layer]) {
    let lr = cfg.learning_rate;
    let wd = cfg.weight_decay;
    ckpt.step += 1;
    let t = ckpt.step as i32;
    let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| match cfg.optimizer_kind {
        OptimizerKind::Sgd => *p -= lr * (g + wd * *p),
        OptimizerKind::Adam | OptimizerKind::AdamW => {
            let decoupled = cfg.optimizer_kind == OptimizerKind::AdamW;
            let g = if decoupled { g } else { g + wd * *p };
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let adam = (*m / c1) / ((*v / c2).sqrt() + EPS);
            if decoupled {
                *p -= lr * (adam + wd * *p);
            } else {
                *p -= lr * adam;
            }
        }
    };
    for (l, g) in grads.iter().enumerate() {
        let layer = &mut ckpt.network.layers[l];
        let (m, v) = (&mut ckpt.first_moment[l], &mut ckpt.second_moment[l]);
        ndarray::Zip::from(&mut layer.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|p, g, m, v| update(p, *g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, g, m, v| update(p, *g, m, v));
    }
}

/// Trains (or continues training) up to `cfg.epochs` epochs.
///
/// Every epoch draws its batch order and dropout masks from a generator
/// seeded by `(cfg.seed, epoch)`, so resuming from an epoch-`k` checkpoint
/// reproduces a from-scratch run exactly.
pub fn train(
    cfg: &TrainerConfig,
    x: &Array2<f64>,
    labels: &[bool],
    class_weights: [f64; 2],
    resume: Option<Checkpoint>,
) -> Result<Checkpoint> {
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() != labels.len() {
        return Err(Error::InvalidData(format!("{} rows for {} labels", x.nrows(), labels.len())));
    }
    let mut ckpt = match resume {
        Some(c) => {
            c.check_compatible(x.ncols(), cfg)?;
            c
        }
        None => Checkpoint::fresh(Network::new(
            x.ncols(),
            cfg.hidden_units,
            cfg.num_layers,
            derive_seed(cfg.seed, &[0]),
        )?),
    };
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for epoch in ckpt.epochs..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, epoch as u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<bool> = batch.iter().map(|&i| labels[i]).collect();
            let masks = (cfg.dropout > 0.0).then(|| ckpt.network.draw_masks(batch.len(), cfg.dropout, &mut rng));
            let (value, grads) = ckpt.network.loss_and_gradients(
                xb.view(),
                &yb,
                cfg.loss,
                &class_weights,
                cfg.focal_gamma,
                masks.as_deref(),
            )?;
            if !value.is_finite() {
                return Err(Error::TrainingDiverged(format!("loss {value} in epoch {epoch}")));
            }
            step(cfg, &mut ckpt, &grads);
        }
        if ckpt.network.layers.iter().any(|l| l.weights.iter().chain(&l.bias).any(|p| !p.is_finite())) {
            return Err(Error::TrainingDiverged(format!("non-finite weights after epoch {epoch}")));
        }
        ckpt.epochs = epoch + 1;
    }
    Ok(ckpt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryMetric {
    #[default]
    F1,
    Auc,
}

/// Scalarization: `-primary + size_penalty_weight * size_norm +
/// feature_penalty * mask_fraction`, lower is better. An undefined primary
/// metric counts as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub primary_metric: PrimaryMetric,
    /// Weight on the parameter count relative to the reference network.
    pub size_penalty_weight: f64,
    /// Weight on the selected share of input features.
    pub feature_penalty: f64,
    pub reference_hidden_units: usize,
    pub reference_layers: usize,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            primary_metric: PrimaryMetric::F1,
            size_penalty_weight: 0.0,
            feature_penalty: 0.01,
            reference_hidden_units: 512,
            reference_layers: 3,
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.size_penalty_weight >= 0.0 && self.feature_penalty >= 0.0) {
            return Err(Error::InvalidConfig("objective penalties must be >= 0".into()));
        }
        if self.reference_hidden_units == 0 || self.reference_layers == 0 {
            return Err(Error::InvalidConfig("reference network must be non-empty".into()));
        }
        Ok(())
    }

    pub fn scalarize(&self, report: &MetricsReport, size_norm: f64, mask_fraction: f64) -> f64 {
        let primary = match self.primary_metric {
            PrimaryMetric::F1 => report.f1,
            PrimaryMetric::Auc => report.auc,
        };
        -primary.unwrap_or(0.0) + self.size_penalty_weight * size_norm + self.feature_penalty * mask_fraction
    }
}

/// Result of one training-and-validation run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub objective: f64,
    pub report: MetricsReport,
    pub checkpoint: Checkpoint,
}

/// Trains on `train` and scores on `val`.
///
/// Features outside `mask` are dropped, the remaining ones are z-scored
/// with statistics of `train`, and the loss is weighted by the inverse class
/// frequencies of `train`.
pub fn train_and_score(
    cfg: &TrainerConfig,
    train: &Dataset,
    val: &Dataset,
    mask: Option<&FeatureMask>,
    spec: &ObjectiveSpec,
) -> Result<TrainOutcome> {
    resume_and_score(cfg, train, val, mask, spec, None)
}

/// As [`train_and_score`], continuing from a checkpoint trained with the same
/// configuration for fewer epochs.
pub fn resume_and_score(
    cfg: &TrainerConfig,
    train: &Dataset,
    val: &Dataset,
    mask: Option<&FeatureMask>,
    spec: &ObjectiveSpec,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidData(format!(
            "empty split ({} train rows, {} validation rows)",
            train.n_rows(),
            val.n_rows()
        )));
    }
    if train.n_features() != val.n_features() {
        return Err(Error::InvalidData("train and validation widths differ".into()));
    }
    let train_subjects = train.subject_set();
    let leaked: HashSet<&str> = val.subject_set().intersection(&train_subjects).copied().collect();
    if !leaked.is_empty() {
        return Err(Error::InvalidData(format!("{} subject(s) appear in both splits", leaked.len())));
    }

    let full = FeatureMask::all(train.n_features());
    let mask = mask.unwrap_or(&full);
    if mask.len() != train.n_features() {
        return Err(Error::InvalidInput(format!(
            "mask of {} bits for {} features",
            mask.len(),
            train.n_features()
        )));
    }
    mask.validate()?;
    let cols = mask.selected();
    let (train, val) = (train.select_features(&cols), val.select_features(&cols));
    let stats = NormStats::fit_dataset(&train);
    let (xt, xv) = (stats.apply(&train.features), stats.apply(&val.features));
    let weights = class_weights(&train.labels)?;

    let checkpoint = train_checked(cfg, &xt, &train.labels, weights, resume)?;
    let probs = checkpoint.network.predict_proba(xv.view());
    let predictions: Vec<bool> = probs.iter().map(|p| *p >= cfg.threshold).collect();
    let mut report = binary_metrics(&predictions, &val.labels)?;
    report.auc = auc(&probs, &val.labels).ok();

    let size_norm = checkpoint.network.param_count() as f64
        / Network::param_count_for(mask.len(), spec.reference_hidden_units, spec.reference_layers) as f64;
    let objective = spec.scalarize(&report, size_norm, mask.fraction());
    Ok(TrainOutcome {
        objective,
        report,
        checkpoint,
    })
}

fn train_checked(
    cfg: &TrainerConfig,
    x: &Array2<f64>,
    labels: &[bool],
    weights: [f64; 2],
    resume: Option<Checkpoint>,
) -> Result<Checkpoint> {
    if let Some(c) = &resume {
        if c.epochs > cfg.epochs {
            return Err(Error::Checkpoint(format!(
                "checkpoint at epoch {} is past the budget {}",
                c.epochs, cfg.epochs
            )));
        }
    }
    train(cfg, x, labels, weights, resume)
}
