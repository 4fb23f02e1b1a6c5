use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Parameters of the synthetic subject-structured generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub windows_per_subject: usize,
    pub n_features: usize,
    /// The first `n_informative` features carry the class signal.
    pub n_informative: usize,
    /// Mean shift of informative features for positive subjects, in units
    /// of the per-window noise SD.
    pub class_sep: f64,
    /// SD of each subject's latent per-feature offset.
    pub subject_effect_sd: f64,
    pub positive_fraction: f64,
    /// Constant added to every feature (used to build shifted splits).
    pub shift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 40,
            windows_per_subject: 20,
            n_features: 30,
            n_informative: 6,
            class_sep: 1.0,
            subject_effect_sd: 0.5,
            positive_fraction: 0.4,
            shift: 0.0,
            seed: 0,
        }
    }
}

/// What the generator knows about its own output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub informative: Vec<usize>,
    /// Bayes-optimal window-level separator: positive iff
    /// `weights . x + bias > 0` (equal class priors).
    pub separator_weights: Vec<f64>,
    pub separator_bias: f64,
    pub positive_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

/// Generates rows `x = noise + subject_offset + class_sep * y * e_inf + shift`
/// with `noise ~ N(0, I)` and `subject_offset ~ N(0, subject_effect_sd^2 I)`.
/// All rows of a subject share its label.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthOutput> {
    if spec.n_subjects < 2 {
        return Err(Error::Generation("need at least 2 subjects".into()));
    }
    if spec.windows_per_subject < 1 || spec.n_features < 1 {
        return Err(Error::Generation("need at least one window and one feature".into()));
    }
    if spec.n_informative > spec.n_features {
        return Err(Error::Generation(format!(
            "n_informative {} exceeds n_features {}",
            spec.n_informative, spec.n_features
        )));
    }
    if !(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0) {
        return Err(Error::Generation(format!(
            "positive_fraction must be in (0, 1), got {}",
            spec.positive_fraction
        )));
    }
    if !(spec.class_sep.is_finite() && spec.subject_effect_sd.is_finite() && spec.subject_effect_sd >= 0.0 && spec.shift.is_finite()) {
        return Err(Error::Generation("class_sep, subject_effect_sd and shift must be finite, sd >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = ((spec.positive_fraction * spec.n_subjects as f64).round() as usize).clamp(1, spec.n_subjects - 1);
    let mut positive: Vec<bool> = (0..spec.n_subjects).map(|i| i < n_pos).collect();
    positive.shuffle(&mut rng);

    let n_rows = spec.n_subjects * spec.windows_per_subject;
    let d = spec.n_features;
    let mut x = Array2::<f64>::zeros((n_rows, d));
    let mut labels = Vec::with_capacity(n_rows);
    let mut ids = Vec::with_capacity(n_rows);
    let mut row = 0;
    for (s, &is_pos) in positive.iter().enumerate() {
        let id = format!("subj_{s:03}");
        let offset: Vec<f64> = (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.subject_effect_sd * z
            })
            .collect();
        for _ in 0..spec.windows_per_subject {
            for j in 0..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let signal = if is_pos && j < spec.n_informative { spec.class_sep } else { 0.0 };
                x[[row, j]] = noise + offset[j] + signal + spec.shift;
            }
            labels.push(is_pos);
            ids.push(id.clone());
            row += 1;
        }
    }

    let informative: Vec<usize> = (0..spec.n_informative).collect();
    let separator_weights: Vec<f64> = (0..d).map(|j| if j < spec.n_informative { 1.0 } else { 0.0 }).collect();
    let k = spec.n_informative as f64;
    let separator_bias = -k * spec.shift - k * spec.class_sep / 2.0;
    let positive_subjects = positive
        .iter()
        .enumerate()
        .filter(|(_, p)| **p)
        .map(|(s, _)| format!("subj_{s:03}"))
        .collect();
    Ok(SynthOutput {
        dataset: Dataset::new(x, labels, ids, None)?,
        truth: GroundTruth {
            informative,
            separator_weights,
            separator_bias,
            positive_subjects,
        },
    })
}
