//! Feature-matrix datasets with subject identity.
//!
//! Rows are windows or utterances; every row carries the id of the subject
//! it came from and a binary label. Subject identity drives the CV plans, so
//! every transformation here keeps it attached to its row.

mod csv_io;
mod norm;
mod smote;
mod synth;

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{hex_digest, subject_labels};

pub use csv_io::{load_csv, write_csv, CsvSchema};
pub use norm::NormStats;
pub use smote::smote;
pub use synth::{synth_generate, GroundTruth, SynthOutput, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<bool>,
    pub subject_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// True for rows created by oversampling.
    pub synthetic: Vec<bool>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<bool>,
        subject_ids: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || subject_ids.len() != n {
            return Err(Error::InvalidData(format!(
                "{n} feature rows, {} labels, {} subject ids",
                labels.len(),
                subject_ids.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let feature_names = match feature_names {
            Some(names) if names.len() != features.ncols() => {
                return Err(Error::InvalidData(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    features.ncols()
                )))
            }
            Some(names) => names,
            None => (0..features.ncols()).map(|i| format!("f{i}")).collect(),
        };
        Ok(Self {
            features,
            labels,
            subject_ids,
            feature_names,
            synthetic: vec![false; n],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            synthetic: rows.iter().map(|&i| self.synthetic[i]).collect(),
        }
    }

    pub fn select_features(&self, columns: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(1), columns),
            labels: self.labels.clone(),
            subject_ids: self.subject_ids.clone(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            synthetic: self.synthetic.clone(),
        }
    }

    pub fn subject_set(&self) -> HashSet<&str> {
        self.subject_ids.iter().map(String::as_str).collect()
    }

    /// Subject-level labels (majority over rows), sorted by id.
    pub fn subjects(&self) -> Vec<(String, bool)> {
        subject_labels(&self.subject_ids, &self.labels)
    }

    /// Positive and negative row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|y| **y).count();
        (pos, self.labels.len() - pos)
    }

    /// Hex SHA-256 over names, subject ids, labels and the little-endian
    /// bytes of every feature value.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(self.features.len() * 8 + self.n_rows() * 8);
        for name in &self.feature_names {
            bytes.extend_from_slice(name.as_bytes());
            bytes.push(0);
        }
        for (i, row) in self.features.rows().into_iter().enumerate() {
            bytes.extend_from_slice(self.subject_ids[i].as_bytes());
            bytes.push(0);
            bytes.push(self.labels[i] as u8);
            bytes.push(self.synthetic[i] as u8);
            for x in row {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        hex_digest(&bytes)
    }
}

/// Inverse-frequency class weights `w_c = N / (2 N_c)`, as `[negative,
/// positive]`.
pub fn class_weights(labels: &[bool]) -> Result<[f64; 2]> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|y| **y).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::InvalidWeights(format!(
            "class weights need both classes ({pos} positive, {neg} negative)"
        )));
    }
    Ok([n / (2.0 * neg), n / (2.0 * pos)])
}

/// How a dataset is obtained in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: std::path::PathBuf,
        #[serde(default = "default_subject_column")]
        subject_column: String,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Synthetic(SynthSpec),
}

fn default_subject_column() -> String {
    "subject".into()
}

fn default_label_column() -> String {
    "label".into()
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv {
                path,
                subject_column,
                label_column,
            } => load_csv(
                path,
                &CsvSchema {
                    subject_column: subject_column.clone(),
                    label_column: label_column.clone(),
                },
            ),
            DataSource::Synthetic(spec) => Ok(synth_generate(spec)?.dataset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn class_weight_examples() {
        let mut labels = vec![false; 8];
        labels.extend([true, true]);
        let w = class_weights(&labels).unwrap();
        assert_eq!(w, [0.625, 2.5]);
        let weighted: f64 = labels.iter().map(|&y| w[y as usize]).sum();
        assert!((weighted - 10.0).abs() < 1e-12);

        assert_eq!(class_weights(&[true, false, false, true]).unwrap(), [1.0, 1.0]);
        assert!(matches!(class_weights(&[true, true]), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn weighted_count_identity() {
        for pos in 1..20 {
            for neg in 1..20 {
                let labels: Vec<bool> = (0..pos + neg).map(|i| i < pos).collect();
                let w = class_weights(&labels).unwrap();
                let s: f64 = labels.iter().map(|&y| w[y as usize]).sum();
                assert!((s - (pos + neg) as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn construction_checks_shapes() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(Dataset::new(x.clone(), vec![true], vec!["a".into(), "b".into()], None).is_err());
        assert!(Dataset::new(array![[f64::NAN]], vec![true], vec!["a".into()], None).is_err());
        let d = Dataset::new(x, vec![true, false], vec!["a".into(), "b".into()], None).unwrap();
        assert_eq!(d.feature_names, vec!["f0", "f1"]);
        assert_eq!(d.select_rows(&[1]).labels, vec![false]);
        assert_eq!(d.select_features(&[1]).features, array![[2.0], [4.0]]);
    }
}
