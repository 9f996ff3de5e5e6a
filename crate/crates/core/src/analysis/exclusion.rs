//! Exclusion rules for experiment data.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::env::{EnvModel, StateId};
use crate::error::AnalysisError;
use crate::optimal::{solve_value_iteration, teaching_dimension, PreferenceProfile, RankAction, SolverConfig};
use crate::teaching::{replay, Outcome, TeachingGoal};

use super::records::ParticipantRecord;

/// Default do-nothing threshold (steps on a single dog).
pub const DO_NOTHING_THRESHOLD: usize = 36;
/// The stricter reading: at least 37 of 40 steps.
pub const DO_NOTHING_THRESHOLD_STRICT: usize = 37;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    /// The dog's log has no outcome.
    Incomplete,
    /// A log failed replay; the whole participant is dropped.
    ExperimentError,
    /// Some dog got at least the threshold number of do-nothing steps; the
    /// whole participant is dropped.
    DoNothingOveruse,
    /// The dog succeeded in fewer steps than an optimal teacher needs on average.
    FasterThanOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub participant_id: String,
    /// `None` when the whole participant was dropped.
    pub dog: Option<usize>,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    /// Participants with their surviving dogs. Participants left with no dogs
    /// are not listed.
    pub kept: Vec<ParticipantRecord>,
    pub excluded: Vec<Excluded>,
}

impl ExclusionReport {
    pub fn kept_dogs(&self) -> usize {
        self.kept.iter().map(|r| r.logs.len()).sum()
    }

    pub fn count(&self, reason: ExclusionReason) -> usize {
        self.excluded.iter().filter(|e| e.reason == reason).count()
    }
}

/// Apply the exclusion rules.
///
/// Participant-level rules (replay failure, do-nothing overuse) drop every
/// dog of that participant with a single entry. Dog-level rules drop one dog
/// each. The dog index in an entry is the position in the participant's
/// `logs`.
pub fn exclusion_filter(records: &[ParticipantRecord], optimal_length: usize, do_nothing_threshold: usize) -> ExclusionReport {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for rec in records {
        let whole = |reason| Excluded { participant_id: rec.participant_id.clone(), dog: None, reason };
        if rec.logs.iter().any(|l| replay(l).is_err()) {
            excluded.push(whole(ExclusionReason::ExperimentError));
            continue;
        }
        if rec.logs.iter().any(|l| l.do_nothing_count() >= do_nothing_threshold) {
            excluded.push(whole(ExclusionReason::DoNothingOveruse));
            continue;
        }
        let mut logs = Vec::new();
        for (i, log) in rec.logs.iter().enumerate() {
            let reason = match log.outcome {
                None => Some(ExclusionReason::Incomplete),
                Some(Outcome::Success { steps_used }) if steps_used < optimal_length => Some(ExclusionReason::FasterThanOptimal),
                Some(_) => None,
            };
            match reason {
                Some(reason) => excluded.push(Excluded { participant_id: rec.participant_id.clone(), dog: Some(i), reason }),
                None => logs.push(log.clone()),
            }
        }
        if !logs.is_empty() {
            kept.push(ParticipantRecord { logs, ..rec.clone() });
        }
    }
    ExclusionReport { kept, excluded }
}

/// Optimal teaching length used by the exclusion rule: the solver's teaching
/// dimension rounded to the nearest step.
pub fn optimal_length(env: &EnvModel, goal: &TeachingGoal, epsilon: f64) -> Result<usize, AnalysisError> {
    let vt = solve_value_iteration(env, goal, SolverConfig { epsilon, ..Default::default() })?;
    Ok(teaching_dimension(&vt, env).round() as usize)
}

/// Fewest steps in which any teacher could reach the goal if every coin
/// came up in its favor: the learner never explores, ties break the lucky
/// way, and the environment takes any transition with positive probability.
///
/// Breadth-first search over (position, preference profile). Returns `None`
/// when the goal is unreachable. Successes faster than
/// [`optimal_length`] but no faster than this are possible, only unlikely.
pub fn shortest_success_path(env: &EnvModel, goal: &TeachingGoal) -> Option<usize> {
    let n_actions = env.n_actions();
    let is_goal = |p: &PreferenceProfile| env.states().all(|s| p.order(s).is_strict_top(goal.target(s)));
    let start = PreferenceProfile::all_tied(env.n_states(), n_actions);
    if is_goal(&start) {
        return Some(0);
    }
    let mut seen: HashSet<(StateId, PreferenceProfile)> = HashSet::new();
    let mut queue = VecDeque::new();
    for (s, p) in env.initial().iter().enumerate() {
        if *p > 0.0 && seen.insert((StateId(s), start.clone())) {
            queue.push_back((StateId(s), start.clone(), 0usize));
        }
    }
    while let Some((pos, profile, depth)) = queue.pop_front() {
        let order = profile.order(pos);
        for a in order.top().collect::<Vec<_>>() {
            for slot in 0..order.n_placements(a) {
                let Some(new_order) = order.place(a, RankAction(slot as u8)) else { continue };
                let mut next_profile = profile.clone();
                next_profile.0[pos.0] = new_order;
                if is_goal(&next_profile) {
                    return Some(depth + 1);
                }
                for (step, p) in env.successors(pos, a) {
                    if p > 0.0 && seen.insert((step.next_state, next_profile.clone())) {
                        queue.push_back((step.next_state, next_profile.clone(), depth + 1));
                    }
                }
            }
        }
    }
    None
}
