//! Headline metrics, object-level comparisons and report files.

mod category;
mod objects;
mod peak;
mod report;
mod svg;
mod ttest;

pub use category::{category_table, combine_profiles, Aggregation, CategoryRow, CategoryTable, ALL_CATEGORIES, TOTAL_LABEL};
pub use objects::{mean_profile, per_object_accuracy, ObjectAccuracyProfile};
pub use peak::{peak_metric, record_at, ExtractionMode, PeakMetric, PEAK_WINDOW};
pub use report::{
    emit_report, load_run, metrics_row, object_order, LoadedRun, MetricsRow, Report, ReportOptions, CATEGORY_FILE,
    CURVES_CSV, CURVES_SVG, METRICS_FILE, OBJECTS_SVG, TTEST_FILE,
};
pub use ttest::{paired_ttest, two_sided_p, TTest};
