use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tune::RunSummary;
use crate::error::{Error, Result};
use crate::evaluation::{paired_t, wilcoxon_signed_rank, AggregateReport, ComparisonResult, METRIC_NAMES};

/// Column headers in table order.
pub const COLUMN_TITLES: [&str; 6] = ["Accuracy", "Precision", "Recall", "F1", "AUC", "Kappa"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunColumn {
    pub name: String,
    pub optimizer: String,
    pub report: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub result: Option<ComparisonResult>,
    /// Why no result was produced.
    pub note: Option<String>,
}

impl From<Result<ComparisonResult>> for TestOutcome {
    fn from(r: Result<ComparisonResult>) -> Self {
        match r {
            Ok(result) => Self { result: Some(result), note: None },
            Err(e) => Self { result: None, note: Some(e.to_string()) },
        }
    }
}

/// Paired comparison of two runs on the same CV plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub runs: [RunColumn; 2],
    pub plan_hash: String,
    /// F1 pairs `(a, b)` keyed by `(repeat, fold)`, in key order.
    pub f1_pairs: Vec<((usize, usize), f64, f64)>,
    pub wilcoxon: TestOutcome,
    pub paired_t: TestOutcome,
}

fn f1_by_cell(s: &RunSummary) -> BTreeMap<(usize, usize), f64> {
    s.final_results
        .iter()
        .filter_map(|r| Some(((r.repeat, r.fold), r.report.as_ref()?.f1?)))
        .collect()
}

/// Compares the final-phase results of two run directories.
pub fn report_compare(dir_a: &Path, dir_b: &Path) -> Result<ComparisonReport> {
    let a = RunSummary::read(dir_a)?;
    let b = RunSummary::read(dir_b)?;
    let (Some(pa), Some(pb)) = (&a.plan_hash, &b.plan_hash) else {
        return Err(Error::IncomparableRuns("both runs need a CV plan (benchmark runs have none)".into()));
    };
    if pa != pb {
        return Err(Error::IncomparableRuns(format!("CV plans differ ({pa} vs {pb})")));
    }
    let (fa, fb) = (f1_by_cell(&a), f1_by_cell(&b));
    let f1_pairs: Vec<_> = fa
        .iter()
        .filter_map(|(k, x)| fb.get(k).map(|y| (*k, *x, *y)))
        .collect();
    if f1_pairs.len() < 2 {
        return Err(Error::IncomparableRuns(format!(
            "need at least 2 paired fold x seed results, found {}",
            f1_pairs.len()
        )));
    }
    let xs: Vec<f64> = f1_pairs.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = f1_pairs.iter().map(|p| p.2).collect();
    let column = |dir: &Path, s: &RunSummary| -> Result<RunColumn> {
        Ok(RunColumn {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string()),
            optimizer: s.optimizer.name().to_string(),
            report: s
                .final_report
                .clone()
                .ok_or_else(|| Error::IncomparableRuns(format!("{} has no final report", dir.display())))?,
        })
    };
    Ok(ComparisonReport {
        runs: [column(dir_a, &a)?, column(dir_b, &b)?],
        plan_hash: pa.clone(),
        wilcoxon: wilcoxon_signed_rank(&xs, &ys).into(),
        paired_t: paired_t(&xs, &ys).into(),
        f1_pairs,
    })
}

fn cell(report: &AggregateReport, metric: &str) -> String {
    let s = report.metric(metric).expect("known metric");
    match (s.mean, s.sd) {
        (Some(m), Some(sd)) => format!("{m:.3}±{sd:.3}"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "n/a".into(),
    }
}

fn test_line(label: &str, t: &TestOutcome) -> String {
    match (&t.result, &t.note) {
        (Some(r), _) if r.degenerate => format!("{label}: degenerate (all differences zero), p = {:.4}", r.p_value),
        (Some(r), _) => format!("{label}: statistic = {:.4}, p = {:.4}, n = {}", r.statistic, r.p_value, r.n_pairs),
        (None, Some(n)) => format!("{label}: not available ({n})"),
        (None, None) => format!("{label}: not available"),
    }
}

impl ComparisonReport {
    /// Plain-text mean±SD table followed by the paired tests on F1.
    pub fn to_table(&self) -> String {
        let width = self.runs.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "Model");
        for t in COLUMN_TITLES {
            let _ = write!(out, "  {t:>13}");
        }
        out.push('\n');
        for run in &self.runs {
            let _ = write!(out, "{:<width$}", run.name);
            for m in METRIC_NAMES {
                let _ = write!(out, "  {:>13}", cell(&run.report, m));
            }
            out.push('\n');
        }
        out.push('\n');
        let _ = writeln!(out, "paired F1 cells: {}", self.f1_pairs.len());
        let _ = writeln!(out, "{}", test_line("Wilcoxon signed-rank", &self.wilcoxon));
        let _ = writeln!(out, "{}", test_line("paired t", &self.paired_t));
        out
    }
}
