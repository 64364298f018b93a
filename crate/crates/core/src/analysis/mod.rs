//! Metrics, closed-form rehearsal weights, unbiasedness verifiers and
//! loss-landscape grids.

mod decay;
mod erm;
mod landscape;
mod metrics;
mod verify;

pub use decay::{loss_decay, summarize_by_iteration, IterationSummary, LossDecay};
pub use erm::{beta_t, memory_weight};
pub use landscape::{landscape_grid, landscape_plane, LandscapeGrid, Plane, DEFAULT_RESOLUTION};
pub use metrics::{compute_metrics, metrics_json, AccuracyMatrix, MetricsReport};
pub use verify::{
    verify_prop1, verify_prop3, ErmVerdict, LossCheck, Prop1Config, Prop3Config, Tolerances, VerdictStatus,
    DEFAULT_COSINE_THRESHOLD, DEFAULT_WEIGHT_TOLERANCE,
};
