use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// SMOTE oversampling of the minority class.
///
/// Each synthetic row is `x_i + u (x_nn - x_i)` with `x_i` a random minority
/// row, `x_nn` one of its `k` nearest minority neighbours (Euclidean) and
/// `u ~ U[0, 1]`. Rows inherit the source row's subject id and are flagged
/// synthetic. Generation stops once `minority / majority >= target_ratio`.
/// Must only be applied to training folds.
pub fn smote(train: &Dataset, k: usize, target_ratio: f64, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidInput("smote needs k >= 1".into()));
    }
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(Error::InvalidInput(format!("invalid smote target ratio {target_ratio}")));
    }
    let (pos, neg) = train.class_counts();
    let minority_label = pos < neg;
    let (minority, majority) = if minority_label { (pos, neg) } else { (neg, pos) };
    if majority == 0 || minority as f64 / majority as f64 >= target_ratio {
        return Ok(train.clone());
    }
    if minority < 2 {
        return Err(Error::CannotOversample(format!(
            "minority class has {minority} sample(s), need at least 2"
        )));
    }

    let rows: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.labels[i] == minority_label)
        .collect();
    let x = &train.features;
    let k_eff = k.min(rows.len() - 1);
    let neighbours: Vec<Vec<usize>> = rows
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = rows
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let dist: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k_eff).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut new_rows = Vec::new();
    let mut subjects = Vec::new();
    let mut count = minority;
    while (count as f64) / (majority as f64) < target_ratio {
        let s = rng.random_range(0..rows.len());
        let src = rows[s];
        let nn = neighbours[s][rng.random_range(0..k_eff)];
        let u: f64 = rng.random();
        new_rows.extend(x.row(src).iter().zip(x.row(nn)).map(|(a, b)| a + u * (b - a)));
        subjects.push(train.subject_ids[src].clone());
        count += 1;
    }
    let added = subjects.len();
    let extra = Array2::from_shape_vec((added, train.n_features()), new_rows).expect("row width");
    let mut out = train.clone();
    out.features = concatenate(Axis(0), &[train.features.view(), extra.view()]).expect("same width");
    out.labels.extend(std::iter::repeat_n(minority_label, added));
    out.subject_ids.extend(subjects);
    out.synthetic.extend(std::iter::repeat_n(true, added));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn dataset(x: Array2<f64>, labels: Vec<bool>) -> Dataset {
        let ids = (0..labels.len()).map(|i| format!("s{i}")).collect();
        Dataset::new(x, labels, ids, None).unwrap()
    }

    #[test]
    fn two_point_segment() {
        let d = dataset(
            array![[0.0, 0.0], [2.0, 2.0], [9.0, 9.0], [9.0, 8.0], [8.0, 9.0]],
            vec![true, true, false, false, false],
        );
        let out = smote(&d, 1, 0.9, 3).unwrap();
        assert_eq!(out.n_rows(), 6);
        let r = out.features.row(5);
        assert_eq!(r[0], r[1]);
        assert!((0.0..=2.0).contains(&r[0]));
        assert!(out.synthetic[5] && out.labels[5]);
        assert!(out.subject_ids[5] == "s0" || out.subject_ids[5] == "s1");
    }

    #[test]
    fn already_balanced_is_noop() {
        let d = dataset(array![[0.0], [1.0], [2.0], [3.0]], vec![true, false, true, false]);
        assert_eq!(smote(&d, 5, 1.0, 0).unwrap(), d);
    }

    #[test]
    fn ninety_ten_to_parity() {
        let n = 100;
        let x = Array2::from_shape_fn((n, 3), |(i, j)| (i * 3 + j) as f64 * 0.01);
        let labels: Vec<bool> = (0..n).map(|i| i < 10).collect();
        let out = smote(&dataset(x, labels), 5, 1.0, 7).unwrap();
        assert_eq!(out.class_counts(), (90, 90));
    }

    #[test]
    fn singleton_minority_rejected() {
        let d = dataset(array![[0.0], [1.0], [2.0]], vec![true, false, false]);
        assert!(matches!(smote(&d, 1, 1.0, 0), Err(Error::CannotOversample(_))));
    }

    proptest! {
        #[test]
        fn synthetic_rows_lie_between_parents(seed in any::<u64>(), pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..12)) {
            let n_min = pts.len();
            let mut flat: Vec<f64> = pts.iter().flat_map(|p| [p.0, p.1]).collect();
            flat.extend(std::iter::repeat_n(100.0, 2 * (n_min + 4)));
            let x = Array2::from_shape_vec((2 * n_min + 4, 2), flat).unwrap();
            let labels: Vec<bool> = (0..2 * n_min + 4).map(|i| i < n_min).collect();
            let out = smote(&dataset(x, labels), 3, 1.0, seed).unwrap();
            let (lo0, hi0) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
            let (lo1, hi1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
            for i in 0..out.n_rows() {
                if out.synthetic[i] {
                    let r = out.features.row(i);
                    prop_assert!(r[0] >= lo0 - 1e-12 && r[0] <= hi0 + 1e-12);
                    prop_assert!(r[1] >= lo1 - 1e-12 && r[1] <= hi1 + 1e-12);
                }
            }
        }
    }
}
