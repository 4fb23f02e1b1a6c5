//! Subject-wise cross-validation, binary metrics and paired tests.

mod cv;
mod metrics;
mod special;
mod stats;

pub use cv::{make_cv_plan, subject_labels, CvKind, CvPlan, Fold};
pub(crate) use cv::hex_digest;
pub use metrics::{
    aggregate, auc, auc_trapezoid, binary_metrics, AggregateReport, ConfusionCounts, MetricSummary,
    MetricsReport, METRIC_NAMES,
};
pub use special::{ln_gamma, regularized_beta, standard_normal_sf, student_t_two_sided_p};
pub use stats::{
    paired_t, wilcoxon_signed_rank, wilcoxon_signed_rank_with, ComparisonResult, TestKind,
    WilcoxonMethod,
};
