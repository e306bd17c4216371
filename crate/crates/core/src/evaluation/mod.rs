//! Accuracy metrics, Diebold-Mariano tests and result tables.

mod dm;
mod metrics;
mod report;
mod summary;

pub use dm::{dm_test, DmResult, DmStatus};
pub use metrics::{compute_metrics, Metrics, CRITERIA};
pub use report::{dm_matrix, improvement_csv, metrics_long_csv, metrics_wide_table, robustness_table, DmMatrix};
pub use summary::{improvement_table, robustness_summary, Improvement, ResultRow, Robustness};
