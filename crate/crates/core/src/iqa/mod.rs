//! Full-reference image quality metrics and the statistics used to relate
//! them to severity.

mod filter;
mod fullref;
mod report;
mod stats;

pub use fullref::{psnr, ssim, ssim_windowed, vif, MetricName, MetricValue, ReferenceWindow};
pub use report::{
    severity_correlation_report, CorrelationReport, CorrelationRow, LevelSummary, Observation,
    SkippedGroup, MIN_CORRELATION_SAMPLES, UNDEFINED,
};
pub use stats::{
    accuracy_macro_f1, average_ranks, evaluate_severity, mae_rmse, mean_std, pearson, qwk,
    spearman, SeverityEvalReport,
};
