//! Error summaries, correlation, threshold sweeps and the channel study.

mod stats;
mod study;
mod sweep;

pub use stats::{
    correlation_p_value, error_stats, mean, median, paired_valid, pearson, sample_std,
    CorrelationResult, ErrorStats, MAD_TO_STD,
};
pub use study::{combinatorial_study, StudyConfig, StudyReport, StudyRow};
pub use sweep::{default_thresholds, threshold_sweep, Localization, SweepConfig, SweepMetric, SweepResult};
