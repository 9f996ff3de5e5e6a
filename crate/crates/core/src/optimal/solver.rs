//! Exact optimal teaching by value iteration on the abstract teaching MDP.
//!
//! An abstract state is the learner's position plus the per-state action
//! ordering of its table. Each step the learner draws an ε-greedy action from
//! the ordering at its position, the environment moves it, and the teacher, who
//! has seen the move, picks where the updated entry lands relative to the other
//! actions ([`RankAction`]). The step costs 1; states whose ordering makes every
//! target action the strict maximum are terminal. The fixed point
//!
//! ```text
//! V(pos, prof) = 0                                              if prof is a goal
//! V(pos, prof) = 1 + Σ_a P_ε(a | prof[pos]) Σ_pos' P(pos' | pos, a)
//!                    · min_k V(pos', prof with prof[pos] ← place(a, k))
//! ```
//!
//! is the expected number of steps an optimal teacher needs, and is the same
//! for every learner in the family because any placement can be realized by a
//! suitable reward.

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvModel, StateId};
use crate::error::SolverError;
use crate::learner::QTable;
use crate::teaching::TeachingGoal;

use super::rank::{abstract_profile, OrderCatalog, PreferenceProfile, RankAction, WeakOrder};

/// Upper bound on abstract states the solver will allocate.
pub const MAX_ABSTRACT_STATES: u128 = 20_000_000;

/// Values within this distance count as tied when extracting the policy.
const POLICY_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, tol: 1e-10, max_iters: 1_000_000 }
    }
}

/// The abstract teaching MDP for one environment, goal and exploration rate.
#[derive(Debug, Clone)]
pub struct AbstractTeachingMdp {
    n_states: usize,
    n_actions: usize,
    epsilon: f64,
    catalog: OrderCatalog,
    n_profiles: usize,
    /// radix^s for s in 0..n_states
    powers: Vec<usize>,
    /// goal_orders[s][o]: order o makes the target the strict top at state s
    goal_orders: Vec<Vec<bool>>,
    goal_profile: Vec<bool>,
    /// probs[o][a]
    probs: Vec<Vec<f64>>,
    /// placements[o][a][k] = order index after placing a at slot k
    placements: Vec<Vec<Vec<usize>>>,
    /// succ[pos][a] = (pos', probability), door resets folded into pos'
    succ: Vec<Vec<Vec<(usize, f64)>>>,
}

impl AbstractTeachingMdp {
    pub fn new(env: &EnvModel, goal: &TeachingGoal, epsilon: f64) -> Result<Self, SolverError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(SolverError::BadConfig(format!("epsilon {epsilon} must be in [0, 1)")));
        }
        goal.check_env(env).map_err(|e| SolverError::BadGoal(e.to_string()))?;
        let n_states = env.n_states();
        let n_actions = env.n_actions();
        let catalog = OrderCatalog::new(n_actions);
        let radix = catalog.len();
        let total = (radix as u128).checked_pow(n_states as u32).map(|p| p * n_states as u128);
        let n_profiles = match total {
            Some(t) if t <= MAX_ABSTRACT_STATES => radix.pow(n_states as u32),
            Some(t) => return Err(SolverError::TooLarge(t)),
            None => return Err(SolverError::TooLarge(u128::MAX)),
        };
        let powers: Vec<usize> = (0..n_states).map(|s| radix.pow(s as u32)).collect();

        let goal_orders: Vec<Vec<bool>> =
            (0..n_states).map(|s| catalog.iter().map(|o| o.is_strict_top(goal.target(StateId(s)))).collect()).collect();
        let goal_profile = (0..n_profiles).map(|code| (0..n_states).all(|s| goal_orders[s][(code / powers[s]) % radix])).collect();
        let probs = catalog.iter().map(|o| o.action_probs(epsilon)).collect();
        let placements = catalog
            .iter()
            .map(|o| {
                (0..n_actions)
                    .map(|a| {
                        let a = ActionId(a);
                        (0..o.n_placements(a))
                            .map(|k| {
                                let placed = o.place(a, RankAction(k as u8)).expect("slot in range");
                                catalog.index_of(&placed).expect("catalog is complete")
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let succ = (0..n_states)
            .map(|s| {
                (0..n_actions)
                    .map(|a| {
                        let mut merged: Vec<(usize, f64)> = Vec::new();
                        for (st, p) in env.successors(StateId(s), ActionId(a)) {
                            match merged.iter_mut().find(|(n, _)| *n == st.next_state.0) {
                                Some(entry) => entry.1 += p,
                                None => merged.push((st.next_state.0, p)),
                            }
                        }
                        merged.sort_by_key(|(n, _)| *n);
                        merged
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n_states, n_actions, epsilon, catalog, n_profiles, powers, goal_orders, goal_profile, probs, placements, succ })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Total number of abstract states, `|S| · W^|S|` with `W` weak orders per state.
    pub fn len(&self) -> usize {
        self.n_profiles * self.n_states
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn radix(&self) -> usize {
        self.catalog.len()
    }

    fn digit(&self, code: usize, s: usize) -> usize {
        (code / self.powers[s]) % self.radix()
    }

    fn with_digit(&self, code: usize, s: usize, order: usize) -> usize {
        code - self.digit(code, s) * self.powers[s] + order * self.powers[s]
    }

    fn index(&self, pos: usize, code: usize) -> usize {
        code * self.n_states + pos
    }

    pub fn encode(&self, pos: StateId, profile: &PreferenceProfile) -> Option<usize> {
        if pos.0 >= self.n_states || profile.n_states() != self.n_states {
            return None;
        }
        let mut code = 0;
        for (s, o) in profile.0.iter().enumerate() {
            code += self.catalog.index_of(o)? * self.powers[s];
        }
        Some(self.index(pos.0, code))
    }

    pub fn decode(&self, idx: usize) -> (StateId, PreferenceProfile) {
        let pos = idx % self.n_states;
        let code = idx / self.n_states;
        let profile = (0..self.n_states).map(|s| self.catalog.get(self.digit(code, s)).clone()).collect();
        (StateId(pos), PreferenceProfile(profile))
    }

    pub fn is_goal(&self, idx: usize) -> bool {
        self.goal_profile[idx / self.n_states]
    }

    /// Target-state ordering check used for display: is `o` a goal order at `s`?
    pub fn is_goal_order(&self, s: StateId, o: &WeakOrder) -> bool {
        self.catalog.index_of(o).is_some_and(|i| self.goal_orders[s.0][i])
    }

    /// Best placement value after the learner took `a` from `pos` and landed
    /// on `next`: `(min value, argmin slot)`.
    fn best_placement(&self, v: &[f64], code: usize, pos: usize, a: usize, next: usize) -> (f64, RankAction) {
        let order = self.digit(code, pos);
        let slots = &self.placements[order][a];
        // strict placements first so ties resolve away from EQUAL
        let preference = (0..slots.len()).step_by(2).chain((1..slots.len()).step_by(2));
        let mut best = (f64::INFINITY, RankAction(0));
        for k in preference {
            let value = v[self.index(next, self.with_digit(code, pos, slots[k]))];
            if value < best.0 - POLICY_TIE_TOLERANCE {
                best = (value, RankAction(k as u8));
            }
        }
        best
    }

    /// Bellman backup of one abstract state.
    pub fn backup(&self, v: &[f64], idx: usize) -> f64 {
        if self.is_goal(idx) {
            return 0.0;
        }
        let pos = idx % self.n_states;
        let code = idx / self.n_states;
        let probs = &self.probs[self.digit(code, pos)];
        let mut total = 1.0;
        for (a, pa) in probs.iter().enumerate() {
            if *pa == 0.0 {
                continue;
            }
            for (next, p) in &self.succ[pos][a] {
                total += pa * p * self.best_placement(v, code, pos, a, *next).0;
            }
        }
        total
    }

    /// One synchronous sweep `out = T v`; returns `max |out - v|`.
    pub fn sweep(&self, v: &[f64], out: &mut [f64]) -> f64 {
        let mut residual: f64 = 0.0;
        for (idx, o) in out.iter_mut().enumerate() {
            *o = self.backup(v, idx);
            residual = residual.max((*o - v[idx]).abs());
        }
        residual
    }

    pub fn solve(&self, tol: f64, max_iters: usize) -> Result<ValueTable, SolverError> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(SolverError::BadConfig(format!("tol {tol} must be positive")));
        }
        let mut v = vec![0.0; self.len()];
        let mut next = vec![0.0; self.len()];
        let mut residual = f64::INFINITY;
        for iter in 1..=max_iters {
            residual = self.sweep(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
            if residual < tol {
                return Ok(self.extract(v, iter, residual));
            }
        }
        Err(SolverError::NotConverged { iterations: max_iters, residual })
    }

    fn extract(&self, values: Vec<f64>, iterations: usize, residual: f64) -> ValueTable {
        let n_next = self.n_states;
        let mut policy = vec![None; self.len() * self.n_actions * n_next];
        for idx in 0..self.len() {
            if self.is_goal(idx) {
                continue;
            }
            let pos = idx % self.n_states;
            let code = idx / self.n_states;
            for a in 0..self.n_actions {
                for (next, _) in &self.succ[pos][a] {
                    let (_, k) = self.best_placement(&values, code, pos, a, *next);
                    policy[(idx * self.n_actions + a) * n_next + next] = Some(k);
                }
            }
        }
        ValueTable { mdp: self.clone(), values, policy, iterations, residual }
    }
}

/// Converged values and the greedy placement for every reachable branch.
#[derive(Debug, Clone)]
pub struct ValueTable {
    mdp: AbstractTeachingMdp,
    values: Vec<f64>,
    /// (idx, a, pos') → placement
    policy: Vec<Option<RankAction>>,
    iterations: usize,
    residual: f64,
}

impl ValueTable {
    pub fn mdp(&self) -> &AbstractTeachingMdp {
        &self.mdp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn epsilon(&self) -> f64 {
        self.mdp.epsilon
    }

    pub fn value(&self, pos: StateId, profile: &PreferenceProfile) -> Option<f64> {
        self.mdp.encode(pos, profile).map(|i| self.values[i])
    }

    /// Optimal placement after the learner at `pos` took `a` and landed on `next`.
    /// `None` when the profile is already a goal or the branch is impossible.
    pub fn choice(&self, pos: StateId, profile: &PreferenceProfile, a: ActionId, next: StateId) -> Option<RankAction> {
        let idx = self.mdp.encode(pos, profile)?;
        if a.0 >= self.mdp.n_actions || next.0 >= self.mdp.n_states {
            return None;
        }
        self.policy[(idx * self.mdp.n_actions + a.0) * self.mdp.n_states + next.0]
    }

    /// Expected steps from the start distribution with initial table `q0`.
    pub fn teaching_dimension_from(&self, env: &EnvModel, q0: &QTable) -> f64 {
        let profile = abstract_profile(q0);
        env.initial()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(s, p)| p * self.value(StateId(s), &profile).expect("profile from a matching table"))
            .sum()
    }

    pub fn dump(&self) -> ValueTableDump {
        let entries = (0..self.values.len())
            .map(|idx| {
                let (pos, profile) = self.mdp.decode(idx);
                let mut choices = Vec::new();
                for a in 0..self.mdp.n_actions {
                    for next in 0..self.mdp.n_states {
                        if let Some(k) = self.choice(pos, &profile, ActionId(a), StateId(next)) {
                            choices.push(ChoiceDump { action: ActionId(a), next: StateId(next), placement: k, name: k.to_string() });
                        }
                    }
                }
                ValueEntryDump { pos, profile, value: self.values[idx], goal: self.mdp.is_goal(idx), choices }
            })
            .collect();
        ValueTableDump { epsilon: self.mdp.epsilon, iterations: self.iterations, residual: self.residual, entries }
    }
}

/// Solve the abstract teaching MDP for `env`, `goal` and exploration rate.
pub fn solve_value_iteration(env: &EnvModel, goal: &TeachingGoal, cfg: SolverConfig) -> Result<ValueTable, SolverError> {
    AbstractTeachingMdp::new(env, goal, cfg.epsilon)?.solve(cfg.tol, cfg.max_iters)
}

/// Expected optimal teaching steps from the start distribution and an all-zero table.
pub fn teaching_dimension(vt: &ValueTable, env: &EnvModel) -> f64 {
    vt.teaching_dimension_from(env, &QTable::for_env(env))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueTableDump {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    pub entries: Vec<ValueEntryDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueEntryDump {
    pub pos: StateId,
    pub profile: PreferenceProfile,
    pub value: f64,
    pub goal: bool,
    pub choices: Vec<ChoiceDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiceDump {
    pub action: ActionId,
    pub next: StateId,
    pub placement: RankAction,
    pub name: String,
}
