//! Detection and accuracy metrics, timing, and experiment grids.

pub mod grid;
pub mod metrics;
pub mod timing;

pub use grid::{run_grid, CellKey, CellResult, DefenseSetting, GridReport, GridSpec, MetricsRow};
pub use metrics::{
    accuracy_curve, confusion, debate_detection, detection_metrics, pooled_detection, AccuracyCurve, AnswerView,
    Confusion, DebateDetection, DetectionReport, MetricsError,
};
pub use timing::{measure_overhead, overhead_csv, TimingReport};
