use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Self {
        let mut c = Self::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Binary classification metrics. `None` marks an undefined ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub kappa: Option<f64>,
    pub counts: ConfusionCounts,
    pub n_pos: u64,
    pub n_neg: u64,
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 6] = ["accuracy", "precision", "recall", "f1", "auc", "kappa"];

impl MetricsReport {
    /// Every count-derived metric; `auc` is left empty.
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, tn, fn_ } = counts;
        let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
        let n = tp + fp + tn + fn_;
        let accuracy = ratio(tp + tn, n);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) => ratio(2.0 * p * r, p + r),
            _ => None,
        };
        let kappa = if n == 0.0 {
            None
        } else {
            let p_o = (tp + tn) / n;
            let p_e = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
            ratio(p_o - p_e, 1.0 - p_e)
        };
        Self {
            accuracy,
            precision,
            recall,
            f1,
            auc: None,
            kappa,
            counts,
            n_pos: counts.tp + counts.fn_,
            n_neg: counts.tn + counts.fp,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "accuracy" => self.accuracy,
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            "auc" => self.auc,
            "kappa" => self.kappa,
            _ => None,
        }
    }
}

pub fn binary_metrics(predictions: &[bool], labels: &[bool]) -> Result<MetricsReport> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    Ok(MetricsReport::from_counts(ConfusionCounts::from_predictions(predictions, labels)))
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|y| **y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!("{n_pos} positives and {n_neg} negatives")));
    }
    Ok((n_pos, n_neg))
}

/// Area under the ROC curve as the normalized Mann-Whitney statistic:
/// `(concordant + 0.5 * tied) / (n_pos * n_neg)`, via average ranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives keeps tie averages integral
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, average (i + j + 2) / 2
        let avg2 = (i + j + 2) as u64;
        let pos_in_group = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        rank_sum2 += avg2 * pos_in_group;
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Area under the ROC curve by trapezoidal integration over the curve's
/// vertices (one vertex per distinct score).
pub fn auc_trapezoid(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut prev_tp, mut prev_fp) = (0u64, 0u64);
    // accumulate twice the area in integer units of 1/(n_pos n_neg)
    let mut area2: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - prev_fp) * (tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: Option<f64>,
    /// Defined values used.
    pub n: usize,
    /// Undefined values skipped.
    pub excluded: usize,
}

impl MetricSummary {
    fn from_values(values: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let n = defined.len();
        let mean = (n > 0).then(|| defined.iter().sum::<f64>() / n as f64);
        let sd = (n > 1).then(|| {
            let m = mean.unwrap();
            (defined.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self {
            mean,
            sd,
            n,
            excluded: values.len() - n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub auc: MetricSummary,
    pub kappa: MetricSummary,
    pub reports: usize,
}

impl AggregateReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        match name {
            "accuracy" => Some(&self.accuracy),
            "precision" => Some(&self.precision),
            "recall" => Some(&self.recall),
            "f1" => Some(&self.f1),
            "auc" => Some(&self.auc),
            "kappa" => Some(&self.kappa),
            _ => None,
        }
    }
}

/// Mean and sample SD per metric across fold or seed reports.
pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    let col = |f: fn(&MetricsReport) -> Option<f64>| {
        MetricSummary::from_values(&reports.iter().map(f).collect::<Vec<_>>())
    };
    Ok(AggregateReport {
        accuracy: col(|r| r.accuracy),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        f1: col(|r| r.f1),
        auc: col(|r| r.auc),
        kappa: col(|r| r.kappa),
        reports: reports.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pairwise enumeration, the definition of the statistic.
    fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < 1e-12)
    }

    #[test]
    fn table_example_counts() {
        let r = MetricsReport::from_counts(ConfusionCounts { tp: 3, fp: 1, tn: 4, fn_: 2 });
        assert!(close(r.accuracy, 0.7));
        assert!(close(r.precision, 0.75));
        assert!(close(r.recall, 0.6));
        assert!(close(r.f1, 2.0 / 3.0));
        assert_eq!((r.n_pos, r.n_neg), (5, 5));
    }

    #[test]
    fn perfect_agreement() {
        let y = [true, false, true, false, false];
        let r = binary_metrics(&y, &y).unwrap();
        for m in ["accuracy", "precision", "recall", "f1", "kappa"] {
            assert_eq!(r.metric(m), Some(1.0), "{m}");
        }
        // single class present: chance agreement is 1 and kappa is undefined
        let y = [true, true];
        assert_eq!(binary_metrics(&y, &y).unwrap().kappa, None);
    }

    #[test]
    fn all_positive_predictions_have_zero_kappa() {
        let labels = [true, false, true, false];
        let r = binary_metrics(&[true; 4], &labels).unwrap();
        assert!(close(r.kappa, 0.0));
        assert!(close(r.accuracy, 0.5));
    }

    #[test]
    fn undefined_ratios_are_marked() {
        let r = binary_metrics(&[false, false], &[false, true]).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.f1, None);
        assert!(close(r.recall, 0.0));
        assert!(binary_metrics(&[true], &[true, false]).is_err());
        assert!(binary_metrics(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[true, false, true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(), 0.75);
        assert_eq!(auc_trapezoid(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc(_))));
    }

    #[test]
    fn aggregate_examples() {
        let mut a = MetricsReport::from_counts(ConfusionCounts { tp: 3, fp: 1, tn: 4, fn_: 2 });
        let single = aggregate(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.f1.sd, None);
        assert_eq!(single.f1.n, 1);

        let same = aggregate(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.accuracy.sd, Some(0.0));

        let mut b = a.clone();
        a.f1 = Some(0.7);
        b.f1 = Some(0.8);
        let two = aggregate(&[a.clone(), b]).unwrap();
        assert!((two.f1.mean.unwrap() - 0.75).abs() < 1e-12);
        assert!((two.f1.sd.unwrap() - 0.070_710_678_118_654_76).abs() < 1e-12);

        let mut c = a.clone();
        c.precision = None;
        let skip = aggregate(&[a, c]).unwrap();
        assert_eq!((skip.precision.n, skip.precision.excluded), (1, 1));
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn auc_routes_agree(pairs in proptest::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 7.0).collect();
            let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(labels.iter().any(|y| *y) && labels.iter().any(|y| !*y));
            let brute = auc_pairs(&scores, &labels);
            prop_assert!((auc(&scores, &labels).unwrap() - brute).abs() < 1e-12);
            prop_assert!((auc_trapezoid(&scores, &labels).unwrap() - brute).abs() < 1e-12);
        }

        #[test]
        fn kappa_is_bounded(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            let r = MetricsReport::from_counts(ConfusionCounts { tp, fp, tn, fn_ });
            if let Some(k) = r.kappa {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
                if (k - 1.0).abs() < 1e-12 {
                    prop_assert!(fp == 0 && fn_ == 0);
                }
            }
        }
    }
}
