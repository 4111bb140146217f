//! Directional calls against a rolling ±2σ band, classification metrics,
//! horizon sweeps with a persistence baseline, and case-study replays.

mod backtest;
mod direction;
mod metrics;
mod replay;

pub use backtest::{
    evaluate_forecaster, forecast_anchors, horizon_sweep, persistence_baseline, read_predictions, rolling_stats_at,
    score_points, write_metrics_report, write_predictions, write_trend_tables, AverageRow, HorizonReport, MeanStd,
    MetricsReport, PredictionRecord, ScoredPoint, SkippedAnchor, TargetRow, UnscoredCounts,
};
pub use direction::{
    classify_direction, direction_probabilities, rolling_stats, ClassScores, Direction, RollingStats, DIRECTIONS,
};
pub use metrics::{auc_ovr, binary_auc, compute_metrics, AucReport, ClassMetrics, ConfusionMatrix, LabelMetrics};
pub use replay::{case_study_replay, window_direction, write_replay_csv, ReplayRow, ReplaySummary, ReplayTable};

/// Days in the trailing band window.
pub const ROLLING_WINDOW: usize = 28;
