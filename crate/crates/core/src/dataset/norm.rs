use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;

/// Per-feature z-score statistics fit on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub sd: Vec<f64>,
    /// Features whose training values do not vary; they normalize to 0.
    pub constant: Vec<bool>,
}

const CONSTANT_SD: f64 = 1e-12;

impl NormStats {
    pub fn fit(train: &Array2<f64>) -> Self {
        let n = train.nrows().max(1) as f64;
        let mean: Vec<f64> = train.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
        let sd: Vec<f64> = train
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(col, m)| (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        let constant = sd.iter().map(|s| *s < CONSTANT_SD).collect();
        Self { mean, sd, constant }
    }

    pub fn fit_dataset(train: &Dataset) -> Self {
        Self::fit(&train.features)
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.mean[j], self.sd[j]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        out
    }

    pub fn apply_dataset(&self, d: &Dataset) -> Dataset {
        Dataset {
            features: self.apply(&d.features),
            ..d.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec};
    use ndarray::array;

    #[test]
    fn train_split_is_standardized() {
        let x = array![[1.0, 5.0, 3.0], [2.0, 5.0, -1.0], [4.0, 5.0, 0.5], [9.0, 5.0, 2.0]];
        let stats = NormStats::fit(&x);
        let z = stats.apply(&x);
        for j in [0, 2] {
            let col = z.column(j);
            let m = col.mean().unwrap();
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
        assert_eq!(stats.constant, vec![false, true, false]);
        assert!(z.column(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shifted_validation_keeps_offset() {
        let base = SynthSpec {
            n_subjects: 20,
            windows_per_subject: 10,
            n_features: 4,
            n_informative: 2,
            class_sep: 1.0,
            ..SynthSpec::default()
        };
        let train = synth_generate(&base).unwrap().dataset;
        let val = synth_generate(&SynthSpec { seed: 99, shift: 3.0, ..base }).unwrap().dataset;
        let stats = NormStats::fit_dataset(&train);
        let z = stats.apply_dataset(&val);
        let means = z.features.mean_axis(Axis(0)).unwrap();
        // train sd is roughly sqrt(1 + subject_sd^2 + class mixing), so the
        // shift survives as well over one standard unit
        assert!(means.iter().all(|m| *m > 1.0), "{means:?}");
    }

    #[test]
    fn fit_is_a_pure_function_of_train() {
        let d = synth_generate(&SynthSpec::default()).unwrap().dataset;
        let a = NormStats::fit_dataset(&d);
        let b = NormStats::fit_dataset(&d.clone());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
