//! Feedback permutation test.
//!
//! For each simulation the participant's feedback for every state-action
//! pair is shuffled independently, and a fresh learner of the participant's
//! condition is taught by handing out that pair's feedback in shuffled order
//! whenever the learner takes that action in that state. The learner's moves
//! are re-sampled, so a pair may come up more often than the participant fed
//! it; extra visits draw uniformly from the pair's feedback, and pairs the
//! participant never fed get do-nothing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvModel;
use crate::error::{AnalysisError, TeachingError};
use crate::learner::LearnerState;
use crate::rng::{seeded, split_seed, RandomSource};
use crate::teaching::{goal_reached, run_episode, FeedbackValue, Outcome, SessionLog, TeacherObservation};

use super::records::ParticipantRecord;

/// State-action pair as plain indices.
pub type Pair = (usize, usize);

/// Feedback per pair, in the order given.
pub type FeedbackPools = BTreeMap<Pair, Vec<FeedbackValue>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub participant_id: String,
    pub n_simulations: usize,
    pub n_target_reached: usize,
    /// Seed of each simulation, in simulation order.
    pub seeds: Vec<u64>,
    /// Steps to the target for each simulation, `None` if never reached.
    pub steps: Vec<Option<usize>>,
}

impl PermutationResult {
    pub fn fraction_reached(&self) -> f64 {
        self.n_target_reached as f64 / self.n_simulations as f64
    }
}

/// The participant's feedback for every pair, across all dogs in order.
pub fn feedback_pools(p: &ParticipantRecord) -> FeedbackPools {
    let mut pools = FeedbackPools::new();
    for step in p.logs.iter().flat_map(|l| &l.steps) {
        pools.entry((step.s.0, step.a.0)).or_default().push(step.feedback);
    }
    pools
}

/// Shuffle every pool independently.
pub fn permute_pools(pools: &FeedbackPools, rng: &mut RandomSource) -> FeedbackPools {
    pools
        .iter()
        .map(|(k, v)| {
            let mut v = v.clone();
            v.shuffle(rng);
            (*k, v)
        })
        .collect()
}

/// Hands out feedback from per-pair queues.
#[derive(Debug, Clone)]
pub struct PooledFeedback {
    pools: FeedbackPools,
    cursor: BTreeMap<Pair, usize>,
    rng: RandomSource,
}

impl PooledFeedback {
    pub fn new(pools: FeedbackPools, seed: u64) -> Self {
        Self { pools, cursor: BTreeMap::new(), rng: seeded(seed) }
    }

    /// Next feedback for `(s, a)`: the queue in order, then uniform draws
    /// from the queue once it runs out, or do-nothing if it is empty.
    pub fn next(&mut self, pair: Pair) -> FeedbackValue {
        let Some(pool) = self.pools.get(&pair).filter(|p| !p.is_empty()) else {
            return FeedbackValue::do_nothing();
        };
        let i = self.cursor.entry(pair).or_insert(0);
        if *i < pool.len() {
            *i += 1;
            pool[*i - 1]
        } else {
            pool[self.rng.random_range(0..pool.len())]
        }
    }
}

fn check_feedback(p: &ParticipantRecord) -> Result<&SessionLog, AnalysisError> {
    let first = p.logs.first().ok_or_else(|| AnalysisError::EmptyFeedback(p.participant_id.clone()))?;
    if p.logs.iter().all(|l| l.steps.is_empty()) {
        return Err(AnalysisError::EmptyFeedback(p.participant_id.clone()));
    }
    Ok(first)
}

/// Run the permutation test with `n_sim` simulated learners.
///
/// Each learner starts from the first dog's initial table and gets the
/// first dog's step budget, exploration rate and environment. Simulation `i`
/// uses seed `split_seed(seed, i)`.
pub fn permutation_test(p: &ParticipantRecord, n_sim: usize, seed: u64) -> Result<PermutationResult, AnalysisError> {
    if n_sim == 0 {
        return Err(AnalysisError::Invalid("n_sim must be at least 1".into()));
    }
    let template = check_feedback(p)?;
    let env = EnvModel::from_config(template.header.env.clone()).map_err(TeachingError::from)?;
    let pools = feedback_pools(p);
    let seeds: Vec<u64> = (0..n_sim as u64).map(|i| split_seed(seed, i)).collect();
    let steps = seeds.par_iter().map(|&sim_seed| simulate_once(&env, template, &pools, sim_seed)).collect::<Result<Vec<_>, _>>()?;
    Ok(PermutationResult {
        participant_id: p.participant_id.clone(),
        n_simulations: n_sim,
        n_target_reached: steps.iter().filter(|s| s.is_some()).count(),
        seeds,
        steps,
    })
}

fn simulate_once(env: &EnvModel, template: &SessionLog, pools: &FeedbackPools, sim_seed: u64) -> Result<Option<usize>, AnalysisError> {
    let mut shuffle_rng = seeded(split_seed(sim_seed, 0));
    let mut feedback = PooledFeedback::new(permute_pools(pools, &mut shuffle_rng), split_seed(sim_seed, 1));
    let mut teacher = |obs: &TeacherObservation| -> Result<FeedbackValue, TeachingError> { Ok(feedback.next((obs.s.0, obs.a.0))) };
    let cfg = template.header.episode_config.with_seed(split_seed(sim_seed, 2));
    let learner = template.initial_learner()?;
    let log = run_episode(env, learner, &mut teacher, &template.header.goal, cfg)?;
    Ok(log.outcome.and_then(|o| o.steps_used()))
}

/// Replay each dog's recorded moves, feeding the learner from the pooled
/// feedback in original order. With the identity permutation this hands
/// every step its own recorded feedback, so the outcomes match the logs.
pub fn replay_recorded_trajectories(p: &ParticipantRecord, pools: FeedbackPools) -> Result<Vec<Option<Outcome>>, AnalysisError> {
    let mut feedback = PooledFeedback::new(pools, 0);
    p.logs
        .iter()
        .map(|log| {
            let mut learner: LearnerState = log.initial_learner()?;
            let max_steps = log.header.episode_config.max_steps;
            for (i, step) in log.steps.iter().enumerate() {
                let fb = feedback.next((step.s.0, step.a.0));
                learner
                    .update(&crate::learner::Experience {
                        s: step.s,
                        a: step.a,
                        s_next: step.s_next,
                        reached_absorb: step.reached_absorb,
                        r: fb.value,
                    })
                    .map_err(TeachingError::from)?;
                if goal_reached(&learner.q, &log.header.goal) {
                    return Ok(Some(Outcome::Success { steps_used: i + 1 }));
                }
                if (i + 1) as u64 >= max_steps {
                    return Ok(Some(Outcome::Timeout));
                }
            }
            Ok(None)
        })
        .collect()
}
