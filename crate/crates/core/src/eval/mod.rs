//! Evaluation protocol: confusion matrix and derived metrics, seeded
//! train/validation/test splitting, 10-fold cross-validation, and ranked
//! model comparison.

mod metrics;
mod report;
mod split;

pub use metrics::{confusion, metrics, ConfusionMatrix, Metrics, MetricsReport};
pub use report::{compare_report, comparison_csv, ComparisonRow};
pub use split::{kfold_partition, kfold_run, split, FoldResult, Split, SplitSpec};
