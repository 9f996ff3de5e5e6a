//! Rewardless environments.
//!
//! An [`EnvModel`] is a finite MDP without a reward function: states, actions,
//! a transition kernel and an initial-state distribution. Transitions may enter
//! a single absorbing "door" outcome; the agent is then placed back at
//! [`EnvModel::absorb_reset`] and the step is flagged with `reached_absorb`.
//! The door is never a learnable state.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::rng::RandomSource;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    /// Dog MDP: move one tile left.
    pub const LEFT: ActionId = ActionId(0);
    /// Dog MDP: move one tile right (towards the door).
    pub const RIGHT: ActionId = ActionId(1);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvStep {
    pub next_state: StateId,
    /// The transition entered the absorbing door; `next_state` is the reset state.
    pub reached_absorb: bool,
}

/// Where a transition lands before reset resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    State(StateId),
    Absorb,
}

/// Config document for an [`EnvModel`].
///
/// `transition[s][a]` has `n_states + 1` entries; the last one is the
/// probability of entering the absorbing door.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    #[serde(default)]
    pub absorb_reset: Option<usize>,
}

/// Immutable rewardless MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvModel {
    n_states: usize,
    n_actions: usize,
    // dense rows, index s * n_actions + a, each of length n_states + 1
    rows: Vec<Vec<f64>>,
    initial: Vec<f64>,
    absorb_reset: Option<StateId>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<(), EnvError> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(EnvError::InvalidConfig(format!("{what} has a negative or non-finite probability")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(EnvError::InvalidConfig(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

impl EnvModel {
    pub fn from_config(cfg: EnvConfig) -> Result<Self, EnvError> {
        if cfg.n_states == 0 || cfg.n_actions == 0 {
            return Err(EnvError::InvalidConfig("environment needs at least one state and one action".into()));
        }
        if cfg.transition.len() != cfg.n_states {
            return Err(EnvError::InvalidConfig(format!(
                "transition has {} state blocks, expected {}",
                cfg.transition.len(),
                cfg.n_states
            )));
        }
        if cfg.initial.len() != cfg.n_states {
            return Err(EnvError::InvalidConfig(format!("initial has {} entries, expected {}", cfg.initial.len(), cfg.n_states)));
        }
        check_distribution("initial", &cfg.initial)?;
        if let Some(r) = cfg.absorb_reset {
            if r >= cfg.n_states {
                return Err(EnvError::InvalidConfig(format!("absorb_reset {r} is not a state")));
            }
        }
        let mut rows = Vec::with_capacity(cfg.n_states * cfg.n_actions);
        for (s, block) in cfg.transition.into_iter().enumerate() {
            if block.len() != cfg.n_actions {
                return Err(EnvError::InvalidConfig(format!("transition[{s}] has {} actions, expected {}", block.len(), cfg.n_actions)));
            }
            for (a, row) in block.into_iter().enumerate() {
                if row.len() != cfg.n_states + 1 {
                    return Err(EnvError::InvalidConfig(format!(
                        "transition[{s}][{a}] has {} entries, expected {}",
                        row.len(),
                        cfg.n_states + 1
                    )));
                }
                check_distribution(&format!("transition[{s}][{a}]"), &row)?;
                if row[cfg.n_states] > 0.0 && cfg.absorb_reset.is_none() {
                    return Err(EnvError::InvalidConfig(format!("transition[{s}][{a}] can reach the door but absorb_reset is unset")));
                }
                rows.push(row);
            }
        }
        Ok(Self {
            n_states: cfg.n_states,
            n_actions: cfg.n_actions,
            rows,
            initial: cfg.initial,
            absorb_reset: cfg.absorb_reset.map(StateId),
        })
    }

    pub fn to_config(&self) -> EnvConfig {
        EnvConfig {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transition: (0..self.n_states)
                .map(|s| (0..self.n_actions).map(|a| self.rows[s * self.n_actions + a].clone()).collect())
                .collect(),
            initial: self.initial.clone(),
            absorb_reset: self.absorb_reset.map(StateId::index),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn absorb_reset(&self) -> Option<StateId> {
        self.absorb_reset
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.n_states).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.n_actions).map(ActionId)
    }

    pub fn check_state(&self, s: StateId) -> Result<(), EnvError> {
        if s.0 < self.n_states {
            Ok(())
        } else {
            Err(EnvError::InvalidState { state: s.0, n_states: self.n_states })
        }
    }

    pub fn check_action(&self, a: ActionId) -> Result<(), EnvError> {
        if a.0 < self.n_actions {
            Ok(())
        } else {
            Err(EnvError::InvalidAction { action: a.0, n_actions: self.n_actions })
        }
    }

    /// Raw transition row for `(s, a)`; the last entry is the door.
    pub fn row(&self, s: StateId, a: ActionId) -> &[f64] {
        &self.rows[s.0 * self.n_actions + a.0]
    }

    /// Positive-probability outcomes of `(s, a)` after reset resolution.
    pub fn successors(&self, s: StateId, a: ActionId) -> Vec<(EnvStep, f64)> {
        self.row(s, a).iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, p)| (self.resolve(self.outcome_at(i)), *p)).collect()
    }

    fn outcome_at(&self, i: usize) -> Outcome {
        if i == self.n_states {
            Outcome::Absorb
        } else {
            Outcome::State(StateId(i))
        }
    }

    fn resolve(&self, o: Outcome) -> EnvStep {
        match o {
            Outcome::State(s) => EnvStep { next_state: s, reached_absorb: false },
            Outcome::Absorb => EnvStep {
                // validated at construction: door mass implies absorb_reset
                next_state: self.absorb_reset.expect("door reachable without reset state"),
                reached_absorb: true,
            },
        }
    }

    /// Sample one transition. Deterministic rows draw nothing from `rng`.
    pub fn step(&self, s: StateId, a: ActionId, rng: &mut RandomSource) -> Result<EnvStep, EnvError> {
        self.check_state(s)?;
        self.check_action(a)?;
        let row = self.row(s, a);
        if let Some(i) = row.iter().position(|p| *p == 1.0) {
            return Ok(self.resolve(self.outcome_at(i)));
        }
        let i = sample_index(row, rng);
        Ok(self.resolve(self.outcome_at(i)))
    }

    /// Sample a start state from the initial distribution.
    pub fn initial_state(&self, rng: &mut RandomSource) -> StateId {
        if let Some(i) = self.initial.iter().position(|p| *p == 1.0) {
            return StateId(i);
        }
        StateId(sample_index(&self.initial, rng))
    }
}

fn sample_index(probs: &[f64], rng: &mut RandomSource) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the accumulated mass
    last_positive
}

/// Number of tiles in the dog garden.
pub const DOG_TILES: usize = 4;

/// The 4 x 1 dog garden: tiles 0..=3 left to right, door to the right of tile 3.
///
/// Left at tile 0 stays put; Right at tile 3 walks through the door and the dog
/// is placed back on tile 3. Every episode starts on tile 3.
pub fn dog_env() -> EnvModel {
    let n = DOG_TILES;
    let transition = (0..n)
        .map(|s| {
            let mut left = vec![0.0; n + 1];
            left[s.saturating_sub(1)] = 1.0;
            let mut right = vec![0.0; n + 1];
            right[s + 1] = 1.0; // s + 1 == n is the door
            vec![left, right]
        })
        .collect();
    let mut initial = vec![0.0; n];
    initial[n - 1] = 1.0;
    EnvModel::from_config(EnvConfig { n_states: n, n_actions: 2, transition, initial, absorb_reset: Some(n - 1) })
        .expect("dog garden config is valid")
}
