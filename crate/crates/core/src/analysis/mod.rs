//! Experiment analysis: exclusion rules, per-condition statistics, the
//! feedback permutation test, and synthetic participants.

pub mod exclusion;
pub mod permutation;
pub mod records;
pub mod stats;
pub mod synth;

pub use exclusion::{
    exclusion_filter, optimal_length, shortest_success_path, Excluded, ExclusionReason, ExclusionReport, DO_NOTHING_THRESHOLD,
    DO_NOTHING_THRESHOLD_STRICT,
};
pub use permutation::{feedback_pools, permutation_test, permute_pools, replay_recorded_trajectories, FeedbackPools, PermutationResult};
pub use records::{group_logs, load_records, Condition, ParticipantRecord};
pub use stats::{compute_condition_stats, t_interval, wilson_interval, ConditionRow, ConditionStats};
pub use synth::{generate_synthetic_logs, SynthConfig, SyntheticTeacher, SYNTH_MARGIN};
