//! Turning rank placements into concrete rewards.
//!
//! Given the placement chosen by the solver, pick the post-update value `q*`
//! for the taken entry (the other action's value plus or minus `margin`, or
//! exactly equal to it) and invert the learner's update rule for the reward:
//!
//! | learner | reward |
//! |---|---|
//! | Q-learning | `(q* - (1-α)q)/α - γ·bootstrap` |
//! | AS1 (log form) | `(q* - q)/κ` |
//! | AS2 | `n·q* - (n-1)·q`, `n` = visits + 1 |
//!
//! The candidate reward is then checked against the learner's actual update
//! and nudged by single ulps if rounding lands on the wrong side.

use std::sync::Arc;

use crate::error::{RealizeError, TeachingError};
use crate::learner::{LearnerSpec, LearnerState};
use crate::teaching::{FeedbackValue, TeacherObservation, TeacherPolicy};

use super::rank::{abstract_profile, RankAction, WeakOrder};
use super::solver::ValueTable;

/// Default gap between the taught entry and its neighbor level.
pub const DEFAULT_MARGIN: f64 = 0.1;

const MAX_NUDGES: usize = 4096;

/// Target interval for the updated entry: `lo < v < hi` for strict slots,
/// `v == lo == hi` for tie slots.
#[derive(Debug, Clone, Copy)]
struct Target {
    value: f64,
    lo: f64,
    hi: f64,
    tie: bool,
}

impl Target {
    fn contains(&self, v: f64) -> bool {
        if self.tie {
            v == self.value
        } else {
            v > self.lo && v < self.hi
        }
    }
}

fn target_for(row: &[f64], taken: usize, slot: RankAction, margin: f64) -> Result<Target, RealizeError> {
    let mut levels: Vec<f64> = row.iter().enumerate().filter(|(i, _)| *i != taken).map(|(_, v)| *v).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let k = slot.0 as usize;
    if k > 2 * levels.len() {
        return Err(RealizeError::BadPlacement { slot: slot.0 });
    }
    if slot.is_tie() {
        let v = levels[k / 2];
        return Ok(Target { value: v, lo: v, hi: v, tie: true });
    }
    let i = k / 2;
    let hi = if i == 0 { f64::INFINITY } else { levels[i - 1] };
    let lo = if i == levels.len() { f64::NEG_INFINITY } else { levels[i] };
    let value = match (i == 0, i == levels.len()) {
        (true, true) => 0.0, // single action: anything goes
        (true, false) => lo + margin,
        (false, true) => hi - margin,
        (false, false) => lo + (hi - lo) / 2.0,
    };
    Ok(Target { value, lo, hi, tie: false })
}

/// Rewards `r0`, then one ulp above and below, two ulps, and so on, until the
/// update lands exactly on `value`. Rounding can skip `value` entirely, in
/// which case the tie cannot be expressed for this learner state.
fn scan_for_tie(r0: f64, value: f64, after: impl Fn(f64) -> Result<f64, RealizeError>) -> Result<f64, RealizeError> {
    if after(r0)? == value {
        return Ok(r0);
    }
    let (mut up, mut down) = (r0, r0);
    for _ in 0..MAX_NUDGES {
        up = up.next_up();
        if after(up)? == value {
            return Ok(up);
        }
        down = down.next_down();
        if after(down)? == value {
            return Ok(down);
        }
    }
    Err(RealizeError::Unreachable)
}

/// Reward that moves the observed entry to placement `choice`.
///
/// `r_max = None` means unbounded rewards.
pub fn realize_reward(
    spec: LearnerSpec,
    obs: &TeacherObservation,
    choice: RankAction,
    margin: f64,
    r_max: Option<f64>,
) -> Result<f64, RealizeError> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(RealizeError::BadMargin(margin));
    }
    let learner = LearnerState { spec, q: obs.q_snapshot.clone(), visits: obs.visits.clone() };
    let q = obs.q_snapshot.get(obs.s, obs.a);
    let target = target_for(obs.q_snapshot.row(obs.s), obs.a.0, choice, margin)?;

    let mut r = match spec {
        LearnerSpec::QLearning { alpha, gamma } => {
            let bootstrap = if obs.reached_absorb { 0.0 } else { obs.q_snapshot.max_row(obs.s_next) };
            (target.value - (1.0 - alpha) * q) / alpha - gamma * bootstrap
        }
        LearnerSpec::As1 { kappa } => (target.value - q) / kappa,
        LearnerSpec::As2 => {
            let n = (obs.visits.get(obs.s, obs.a) + 1) as f64;
            n * target.value - (n - 1.0) * q
        }
    };
    if !r.is_finite() {
        return Err(RealizeError::Unreachable);
    }
    let after = |r: f64| learner.entry_after(&obs.experience(r)).map_err(|_| RealizeError::Unreachable);
    if target.tie {
        r = scan_for_tie(r, target.value, after)?;
    } else {
        let mut v = after(r)?;
        let mut nudges = 0;
        while !target.contains(v) {
            if nudges == MAX_NUDGES {
                return Err(RealizeError::Unreachable);
            }
            r = if v < target.value.clamp(target.lo, target.hi) { r.next_up() } else { r.next_down() };
            v = after(r)?;
            nudges += 1;
        }
    }
    if r == 0.0 {
        r = 0.0; // fold -0.0
    }
    if let Some(bound) = r_max {
        if r.abs() > bound {
            return Err(RealizeError::Infeasible { reward: r, r_max: bound });
        }
    }
    Ok(r)
}

/// The solver's policy made concrete for one learner.
#[derive(Debug, Clone)]
pub struct RealizedTeacherPolicy {
    pub value_table: Arc<ValueTable>,
    pub margin: f64,
    pub r_max: Option<f64>,
    pub learner_spec: LearnerSpec,
}

impl RealizedTeacherPolicy {
    pub fn new(value_table: Arc<ValueTable>, learner_spec: LearnerSpec, margin: f64, r_max: Option<f64>) -> Result<Self, RealizeError> {
        if !(margin > 0.0 && margin.is_finite()) || r_max.is_some_and(|r| margin >= r) {
            return Err(RealizeError::BadMargin(margin));
        }
        Ok(Self { value_table, margin, r_max, learner_spec })
    }

    /// Placement the solver prescribes for this observation.
    pub fn choice(&self, obs: &TeacherObservation) -> Result<RankAction, RealizeError> {
        let profile = abstract_profile(&obs.q_snapshot);
        self.value_table
            .choice(obs.s, &profile, obs.a, obs.s_next)
            .ok_or_else(|| RealizeError::Uncovered(format!("no stored choice at {} for {} -> {}", obs.s, obs.a, obs.s_next)))
    }

    pub fn optimal_feedback(&self, obs: &TeacherObservation) -> Result<FeedbackValue, RealizeError> {
        let choice = self.choice(obs)?;
        self.feedback_for(obs, choice)
    }

    pub fn feedback_for(&self, obs: &TeacherObservation, choice: RankAction) -> Result<FeedbackValue, RealizeError> {
        let r = realize_reward(self.learner_spec, obs, choice, self.margin, self.r_max)?;
        Ok(if r == 0.0 { FeedbackValue::do_nothing() } else { FeedbackValue::value(r) })
    }
}

impl TeacherPolicy for RealizedTeacherPolicy {
    fn feedback(&mut self, obs: &TeacherObservation) -> Result<FeedbackValue, TeachingError> {
        Ok(self.optimal_feedback(obs)?)
    }
}

/// Ordering at `s` after placing the observed entry, computed from the
/// abstract side only (for cross-checks).
pub fn expected_order(obs: &TeacherObservation, choice: RankAction) -> Option<WeakOrder> {
    WeakOrder::of_row(obs.q_snapshot.row(obs.s)).place(obs.a, choice)
}
