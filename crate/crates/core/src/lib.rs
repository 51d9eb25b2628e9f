//! Pairing of driving-log trajectories recorded in two weather domains.
//!
//! Trajectories are projected into a shared planar frame, resampled at a
//! constant arc-length spacing and compared by the fraction of each snowy
//! model lying within a lateral threshold of a clear model. A tiered rule
//! picks a clear match per snowy sequence or defers to a reviewer; matched
//! pairs are cut down to an aligned, resampled clear subsequence and
//! combined into sparse-label training splits.

pub mod coverage;
pub mod endpoint;
pub mod error;
pub mod geo;
pub mod manifest;
pub mod matcher;
pub mod pipeline;
pub mod spatial;
pub mod splits;
pub mod stats;
pub mod synthetic;

#[cfg(test)]
mod test_support;

pub use coverage::{
    cover, coverage_table, d_max, CoverageTable, GridIndex, LateralThresholds,
};
pub use endpoint::{
    align_endpoints, build_pair, select_sampling, PairedSubsequence, SamplingChoice,
    SamplingConfig,
};
pub use error::{Error, Result};
pub use geo::{project_to_local, GeoFrame, LocalOrigin, PlanarPoint, EARTH_RADIUS_M};
pub use manifest::{load_state, load_trajectories, save_state, RunConfig, RunState};
pub use matcher::{
    apply_decision, best_clear, candidate_set, consistency, tiered_select, Candidate, DecidedBy,
    Decision, MatchOutcome, MatchStatus,
};
pub use pipeline::{generate_splits, run_pipeline, write_outputs, Corpus, PipelineRun};
pub use spatial::{
    interpolate_constant_distance, interpolate_or_stationary, SpatialModel, TemporalTrajectory,
    TrajectoryFrame,
};
pub use splits::{
    fractional_split, mix_splits, sparse_plan, Domain, LabelPlan, Role, SplitFraction,
    SplitManifest,
};
pub use stats::{
    classify_motion, distribution_report, ks_statistic, track_speed, AnnotationRecord, Ecdf,
    Motion,
};
