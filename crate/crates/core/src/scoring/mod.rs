//! Proper scoring rules, point metrics and the batch dispatcher.

mod batch;
mod metric;
mod rules;

pub use batch::{score_batch, score_batch_with, BatchOptions, BatchScores, PointFunctional, ScoreResult};
pub use metric::{Metric, MetricSpec, Orientation, WeightKind, WeightRef};
pub use rules::{
    brier, central_interval, crls, crps, energy_score, interval_score, log_score, point_metrics,
    wcrps, weight, PointMetrics, CRLS_EPS, LOG_SCORE_EPS,
};
