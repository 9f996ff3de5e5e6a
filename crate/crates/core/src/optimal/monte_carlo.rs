//! Monte Carlo teaching-dimension estimates and the cross-learner check.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::env::EnvModel;
use crate::error::AnalysisError;
use crate::learner::{LearnerSpec, LearnerState};
use crate::rng::split_seed;
use crate::teaching::{run_episode, EpisodeConfig, SessionLog, TeachingGoal};

use super::realize::RealizedTeacherPolicy;
use super::solver::ValueTable;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub learner: LearnerSpec,
    pub n_episodes: usize,
    pub n_success: usize,
    pub success_rate: f64,
    /// Mean steps over successful episodes.
    pub mean_steps: f64,
    pub std_dev: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    /// Largest |reward| the teacher used.
    pub max_abs_reward: f64,
    /// `Some(steps)` for successes, `None` for timeouts; in episode order.
    pub steps: Vec<Option<usize>>,
}

impl MonteCarloSummary {
    pub fn from_outcomes(learner: LearnerSpec, steps: Vec<Option<usize>>, max_abs_reward: f64) -> Self {
        let n_episodes = steps.len();
        let wins: Vec<f64> = steps.iter().flatten().map(|s| *s as f64).collect();
        let n_success = wins.len();
        let mean = if n_success > 0 { wins.iter().sum::<f64>() / n_success as f64 } else { f64::NAN };
        let std_dev =
            if n_success > 1 { (wins.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_success - 1) as f64).sqrt() } else { 0.0 };
        let std_err = if n_success > 0 { std_dev / (n_success as f64).sqrt() } else { f64::NAN };
        Self {
            learner,
            n_episodes,
            n_success,
            success_rate: n_success as f64 / n_episodes as f64,
            mean_steps: mean,
            std_dev,
            std_err,
            ci95: (mean - Z95 * std_err, mean + Z95 * std_err),
            max_abs_reward,
            steps,
        }
    }

    pub fn overlaps(&self, other: &MonteCarloSummary) -> bool {
        self.ci95.0 <= other.ci95.1 && other.ci95.0 <= self.ci95.1
    }
}

fn max_abs_reward(log: &SessionLog) -> f64 {
    log.steps.iter().fold(0.0, |m, s| m.max(s.feedback.value.abs()))
}

/// Run `n_episodes` optimally taught episodes. Episode `i` uses seed
/// `split_seed(cfg.seed, i)`, so results do not depend on thread count.
pub fn monte_carlo_td(
    env: &EnvModel,
    goal: &TeachingGoal,
    policy: &RealizedTeacherPolicy,
    n_episodes: usize,
    cfg: EpisodeConfig,
) -> Result<MonteCarloSummary, AnalysisError> {
    let per_episode =
        monte_carlo_logs(env, goal, policy, n_episodes, cfg, |log| (log.outcome.and_then(|o| o.steps_used()), max_abs_reward(&log)))?;
    let max_r = per_episode.iter().fold(0.0, |m: f64, (_, r)| m.max(*r));
    Ok(MonteCarloSummary::from_outcomes(policy.learner_spec, per_episode.into_iter().map(|(s, _)| s).collect(), max_r))
}

/// Run the episodes and map each finished log through `keep`.
pub fn monte_carlo_logs<T, F>(
    env: &EnvModel,
    goal: &TeachingGoal,
    policy: &RealizedTeacherPolicy,
    n_episodes: usize,
    cfg: EpisodeConfig,
    keep: F,
) -> Result<Vec<T>, AnalysisError>
where
    T: Send,
    F: Fn(SessionLog) -> T + Sync,
{
    if n_episodes == 0 {
        return Err(AnalysisError::NoEpisodes);
    }
    cfg.validate()?;
    (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            let learner = LearnerState::new(policy.learner_spec, env).map_err(crate::error::TeachingError::from)?;
            let mut teacher = policy.clone();
            let ep_cfg = cfg.with_seed(split_seed(cfg.seed, i as u64));
            let log = run_episode(env, learner, &mut teacher, goal, ep_cfg)?;
            Ok(keep(log))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub summaries: Vec<MonteCarloSummary>,
    /// `(i, j, overlap)` for every pair `i < j`.
    pub pairwise: Vec<(usize, usize, bool)>,
    pub all_overlap: bool,
    /// Solver value from the start state.
    pub teaching_dimension: f64,
}

/// Teach every learner in `specs` with the same solved policy and the same
/// seeds, and compare the step-count estimates.
pub fn verify_equivalence(
    env: &EnvModel,
    goal: &TeachingGoal,
    value_table: Arc<ValueTable>,
    specs: &[LearnerSpec],
    margin: f64,
    n_episodes: usize,
    cfg: EpisodeConfig,
) -> Result<EquivalenceReport, AnalysisError> {
    let summaries = specs
        .iter()
        .map(|spec| {
            let policy =
                RealizedTeacherPolicy::new(value_table.clone(), *spec, margin, cfg.r_max).map_err(crate::error::TeachingError::from)?;
            monte_carlo_td(env, goal, &policy, n_episodes, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut pairwise = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            pairwise.push((i, j, summaries[i].overlaps(&summaries[j])));
        }
    }
    let all_overlap = pairwise.iter().all(|(_, _, o)| *o);
    Ok(EquivalenceReport { summaries, pairwise, all_overlap, teaching_dimension: super::solver::teaching_dimension(&value_table, env) })
}

/// Learners used for the cross-learner check: three Q-learners spanning the
/// learning and discount rates, and both action-signaling learners.
pub fn reference_learners() -> Vec<LearnerSpec> {
    vec![LearnerSpec::q(0.9, 0.0), LearnerSpec::q(0.9, 0.9), LearnerSpec::q(0.1, 0.9), LearnerSpec::As1 { kappa: 1.0 }, LearnerSpec::As2]
}
