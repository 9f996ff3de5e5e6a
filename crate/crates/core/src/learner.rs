//! The tabular learner family: Q-learning and the two action-signaling learners.
//!
//! All three variants keep one real value per `(state, action)` and act
//! ε-greedily on it:
//!
//! * **Q-learning**: `Q(s,a) ← (1-α)Q(s,a) + α(r + γ max_a' Q(s',a'))`, with a
//!   zero bootstrap when the step went through the door.
//! * **AS1**: a per-state multinomial over actions whose mass on the taken
//!   action is multiplied by `exp(κ r)`. It is stored in log-preference form, so
//!   an update is `q(s,a) ← q(s,a) + κ r` and [`LearnerState::as1_belief`] is the
//!   softmax of a row.
//! * **AS2**: the running mean of rewards at each pair,
//!   `Q(s,a) ← (1 - 1/n)Q(s,a) + r/n`, which is Q-learning with `γ = 0` and
//!   `α = 1/n` (see [`as2_as_qlearner`]).
//!
//! Updates are deterministic; only [`LearnerState::select_action`] draws randomness.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvModel, StateId};
use crate::error::LearnerError;
use crate::rng::RandomSource;

/// Dense `n_states x n_actions` table of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn for_env(env: &EnvModel) -> Self {
        Self::zeros(env.n_states(), env.n_actions())
    }

    /// Build from rows; every row must have the same length and finite entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LearnerError> {
        Self::try_from(rows)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s.0 * self.n_actions + a.0]
    }

    /// # Panics
    /// If `v` is not finite.
    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        assert!(v.is_finite(), "Q entries must be finite, got {v}");
        self.values[s.0 * self.n_actions + a.0] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        let start = s.0 * self.n_actions;
        &self.values[start..start + self.n_actions]
    }

    pub fn max_row(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions attaining the row maximum, compared with exact equality.
    pub fn greedy_actions(&self, s: StateId) -> Vec<ActionId> {
        let m = self.max_row(s);
        self.row(s).iter().enumerate().filter(|(_, v)| **v == m).map(|(i, _)| ActionId(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    /// Largest absolute entry-wise difference; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &QTable) -> Option<f64> {
        self.same_shape(other).then(|| self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl TryFrom<Vec<Vec<f64>>> for QTable {
    type Error = LearnerError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(LearnerError::InvalidSpec("Q table must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(LearnerError::InvalidSpec("Q table rows differ in length".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::InvalidSpec("Q table holds a non-finite entry".into()));
        }
        Ok(Self { n_states, n_actions, values })
    }
}

impl From<QTable> for Vec<Vec<f64>> {
    fn from(q: QTable) -> Self {
        q.values.chunks(q.n_actions).map(<[f64]>::to_vec).collect()
    }
}

/// Number of completed updates per pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct VisitCounts {
    n_actions: usize,
    counts: Vec<u64>,
}

impl VisitCounts {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_actions, counts: vec![0; n_states * n_actions] }
    }

    pub fn get(&self, s: StateId, a: ActionId) -> u64 {
        self.counts[s.0 * self.n_actions + a.0]
    }

    fn bump(&mut self, s: StateId, a: ActionId) {
        self.counts[s.0 * self.n_actions + a.0] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl TryFrom<Vec<Vec<u64>>> for VisitCounts {
    type Error = LearnerError;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self, Self::Error> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 || rows.iter().any(|r| r.len() != n_actions) {
            return Err(LearnerError::InvalidSpec("visit counts must be a non-empty rectangle".into()));
        }
        Ok(Self { n_actions, counts: rows.into_iter().flatten().collect() })
    }
}

impl From<VisitCounts> for Vec<Vec<u64>> {
    fn from(v: VisitCounts) -> Self {
        v.counts.chunks(v.n_actions).map(<[u64]>::to_vec).collect()
    }
}

fn default_kappa() -> f64 {
    1.0
}

/// Which learner, with its parameters.
///
/// Serialized as `{"variant": "q", "alpha": .., "gamma": ..}`,
/// `{"variant": "as1", "kappa": ..}` or `{"variant": "as2"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum LearnerSpec {
    #[serde(rename = "q")]
    QLearning { alpha: f64, gamma: f64 },
    #[serde(rename = "as1")]
    As1 {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    #[serde(rename = "as2")]
    As2,
}

impl LearnerSpec {
    pub fn q(alpha: f64, gamma: f64) -> Self {
        LearnerSpec::QLearning { alpha, gamma }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        match *self {
            LearnerSpec::QLearning { alpha, gamma } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(LearnerError::InvalidSpec(format!("alpha {alpha} not in (0, 1]")));
                }
                if !(0.0..1.0).contains(&gamma) {
                    return Err(LearnerError::InvalidSpec(format!("gamma {gamma} not in [0, 1)")));
                }
            }
            LearnerSpec::As1 { kappa } => {
                if !(kappa > 0.0 && kappa.is_finite()) {
                    return Err(LearnerError::InvalidSpec(format!("kappa {kappa} must be positive")));
                }
            }
            LearnerSpec::As2 => {}
        }
        Ok(())
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            LearnerSpec::QLearning { .. } => "q",
            LearnerSpec::As1 { .. } => "as1",
            LearnerSpec::As2 => "as2",
        }
    }

    /// Row label for condition tables, e.g. `Q (γ = 0.45)`.
    pub fn label(&self) -> String {
        match self {
            LearnerSpec::QLearning { alpha, gamma } if *alpha == 0.9 => format!("Q (γ = {gamma:.2})"),
            LearnerSpec::QLearning { alpha, gamma } => format!("Q (α = {alpha:.2}, γ = {gamma:.2})"),
            LearnerSpec::As1 { .. } => "AS1".into(),
            LearnerSpec::As2 => "AS2".into(),
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::QLearning { alpha, gamma } => write!(f, "q:{alpha}:{gamma}"),
            LearnerSpec::As1 { kappa } => write!(f, "as1:{kappa}"),
            LearnerSpec::As2 => write!(f, "as2"),
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = LearnerError;

    /// Parses `q:ALPHA:GAMMA`, `as1`, `as1:KAPPA` or `as2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| LearnerError::Parse(s.to_string()));
        let spec = match parts.as_slice() {
            [v, alpha, gamma] if v.eq_ignore_ascii_case("q") => LearnerSpec::q(num(alpha)?, num(gamma)?),
            [v] if v.eq_ignore_ascii_case("as1") => LearnerSpec::As1 { kappa: 1.0 },
            [v, kappa] if v.eq_ignore_ascii_case("as1") => LearnerSpec::As1 { kappa: num(kappa)? },
            [v] if v.eq_ignore_ascii_case("as2") => LearnerSpec::As2,
            _ => return Err(LearnerError::Parse(s.to_string())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One piece of experience `(s, a, s', r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: StateId,
    pub a: ActionId,
    pub s_next: StateId,
    pub reached_absorb: bool,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicyParams {
    pub epsilon: f64,
}

impl BehaviorPolicyParams {
    pub fn new(epsilon: f64) -> Result<Self, LearnerError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(LearnerError::InvalidSpec(format!("epsilon {epsilon} not in [0, 1]")));
        }
        Ok(Self { epsilon })
    }
}

/// A learner's full internal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub spec: LearnerSpec,
    /// Values for Q-learning and AS2; log-preferences for AS1.
    pub q: QTable,
    pub visits: VisitCounts,
}

impl LearnerState {
    /// Fresh learner with an all-zero table (uniform belief for AS1).
    pub fn new(spec: LearnerSpec, env: &EnvModel) -> Result<Self, LearnerError> {
        Self::with_table(spec, QTable::for_env(env))
    }

    pub fn with_table(spec: LearnerSpec, q: QTable) -> Result<Self, LearnerError> {
        spec.validate()?;
        let visits = VisitCounts::zeros(q.n_states(), q.n_actions());
        Ok(Self { spec, q, visits })
    }

    fn check_experience(&self, e: &Experience) -> Result<(), LearnerError> {
        if !e.r.is_finite() {
            return Err(LearnerError::NonFiniteReward(e.r));
        }
        for s in [e.s, e.s_next] {
            if s.0 >= self.q.n_states() {
                return Err(crate::error::EnvError::InvalidState { state: s.0, n_states: self.q.n_states() }.into());
            }
        }
        if e.a.0 >= self.q.n_actions() {
            return Err(crate::error::EnvError::InvalidAction { action: e.a.0, n_actions: self.q.n_actions() }.into());
        }
        Ok(())
    }

    /// The value `q(e.s, e.a)` would take after learning from `e`, without mutating.
    pub fn entry_after(&self, e: &Experience) -> Result<f64, LearnerError> {
        self.check_experience(e)?;
        let current = self.q.get(e.s, e.a);
        let v = match self.spec {
            LearnerSpec::QLearning { alpha, gamma } => {
                let bootstrap = if e.reached_absorb { 0.0 } else { self.q.max_row(e.s_next) };
                q_learning_target(current, alpha, gamma, e.r, bootstrap)
            }
            LearnerSpec::As1 { kappa } => current + kappa * e.r,
            LearnerSpec::As2 => {
                let n = (self.visits.get(e.s, e.a) + 1) as f64;
                (1.0 - 1.0 / n) * current + e.r / n
            }
        };
        if !v.is_finite() {
            return Err(LearnerError::NonFiniteReward(e.r));
        }
        Ok(v)
    }

    /// Apply the variant's update rule. Touches only the `(s, a)` entry.
    pub fn update(&mut self, e: &Experience) -> Result<(), LearnerError> {
        let v = self.entry_after(e)?;
        self.q.set(e.s, e.a, v);
        self.visits.bump(e.s, e.a);
        Ok(())
    }

    pub fn updated(&self, e: &Experience) -> Result<Self, LearnerError> {
        let mut next = self.clone();
        next.update(e)?;
        Ok(next)
    }

    fn expect_variant(&self, expected: &'static str) -> Result<(), LearnerError> {
        if self.spec.variant_name() == expected {
            Ok(())
        } else {
            Err(LearnerError::WrongVariant { expected, got: self.spec.variant_name() })
        }
    }

    pub fn q_update(&mut self, e: &Experience) -> Result<(), LearnerError> {
        self.expect_variant("q")?;
        self.update(e)
    }

    pub fn as1_update(&mut self, e: &Experience) -> Result<(), LearnerError> {
        self.expect_variant("as1")?;
        self.update(e)
    }

    pub fn as2_update(&mut self, e: &Experience) -> Result<(), LearnerError> {
        self.expect_variant("as2")?;
        self.update(e)
    }

    /// AS1 action distribution at `s`: softmax of the stored log-preferences.
    pub fn as1_belief(&self, s: StateId) -> Result<Vec<f64>, LearnerError> {
        self.expect_variant("as1")?;
        Ok(softmax(self.q.row(s)))
    }

    /// ε-greedy action at `s`; returns `(action, explored)`.
    ///
    /// Draw order is fixed: one uniform for the explore test, then either one
    /// uniform action index or, only when several actions tie for the max, one
    /// index into the tied set. Two learners whose rows have the same ordering
    /// therefore consume identical randomness.
    pub fn select_action(&self, s: StateId, params: BehaviorPolicyParams, rng: &mut RandomSource) -> (ActionId, bool) {
        let explore = rng.random::<f64>() < params.epsilon;
        if explore {
            return (ActionId(rng.random_range(0..self.q.n_actions())), true);
        }
        let greedy = self.q.greedy_actions(s);
        let a = if greedy.len() == 1 { greedy[0] } else { greedy[rng.random_range(0..greedy.len())] };
        (a, false)
    }
}

/// `(1-α)q + α(r + γ·bootstrap)`
pub fn q_learning_target(current: f64, alpha: f64, gamma: f64, r: f64, bootstrap: f64) -> f64 {
    (1.0 - alpha) * current + alpha * (r + gamma * bootstrap)
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `1 / n` where `n` counts updates at the pair, including this one.
    InverseVisits,
}

/// Q-learning with a per-pair learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledQLearner {
    pub gamma: f64,
    pub rate: LearningRate,
}

impl ScheduledQLearner {
    pub fn update(&self, q: &mut QTable, visits: &mut VisitCounts, e: &Experience) -> Result<(), LearnerError> {
        if !e.r.is_finite() {
            return Err(LearnerError::NonFiniteReward(e.r));
        }
        let alpha = match self.rate {
            LearningRate::Constant(a) => a,
            LearningRate::InverseVisits => 1.0 / (visits.get(e.s, e.a) + 1) as f64,
        };
        let bootstrap = if e.reached_absorb { 0.0 } else { q.max_row(e.s_next) };
        let v = q_learning_target(q.get(e.s, e.a), alpha, self.gamma, e.r, bootstrap);
        q.set(e.s, e.a, v);
        visits.bump(e.s, e.a);
        Ok(())
    }
}

/// AS2 written as a Q-learner: `γ = 0`, `α_t = 1/n_t(s,a)`.
pub fn as2_as_qlearner() -> ScheduledQLearner {
    ScheduledQLearner { gamma: 0.0, rate: LearningRate::InverseVisits }
}
