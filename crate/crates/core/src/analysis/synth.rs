//! Synthetic participants for exercising the analysis pipeline.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvModel;
use crate::error::{AnalysisError, RealizeError, TeachingError};
use crate::learner::{LearnerSpec, LearnerState};
use crate::optimal::{realize_reward, solve_value_iteration, RealizedTeacherPolicy, SolverConfig, ValueTable};
use crate::rng::{seeded, split_seed, RandomSource};
use crate::teaching::{run_tagged_episode, EpisodeConfig, FeedbackValue, LogTags, TeacherObservation, TeacherPolicy, TeachingGoal};

use super::records::{Condition, ParticipantRecord};

/// Margin used by synthetic teachers. Small enough that optimal rewards stay
/// inside a `[-1, 1]` slider for forty steps with every experiment learner.
pub const SYNTH_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticTeacher {
    Optimal,
    /// Optimal placements with above and below swapped with probability `p_flip`.
    Noisy {
        p_flip: f64,
    },
    /// Uniform feedback over the whole slider.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub dogs_per_participant: usize,
    pub sync: bool,
    pub episode: EpisodeConfig,
    pub margin: f64,
    /// Prefix for participant ids.
    pub id_prefix: &'static str,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { dogs_per_participant: 3, sync: true, episode: EpisodeConfig::default(), margin: SYNTH_MARGIN, id_prefix: "synth" }
    }
}

/// Feedback from one synthetic teacher. Rewards the slider cannot express are
/// clipped to its end.
#[derive(Debug, Clone)]
struct SynthTeacherPolicy {
    kind: SyntheticTeacher,
    policy: RealizedTeacherPolicy,
    rng: RandomSource,
}

impl TeacherPolicy for SynthTeacherPolicy {
    fn feedback(&mut self, obs: &TeacherObservation) -> Result<FeedbackValue, TeachingError> {
        let bound = self.policy.r_max.unwrap_or(1.0);
        let choice = match self.kind {
            SyntheticTeacher::Random => return Ok(FeedbackValue::value(self.rng.random_range(-bound..=bound))),
            SyntheticTeacher::Optimal => self.policy.choice(obs)?,
            SyntheticTeacher::Noisy { p_flip } => {
                let c = self.policy.choice(obs)?;
                if self.rng.random_bool(p_flip) {
                    c.flipped()
                } else {
                    c
                }
            }
        };
        match realize_reward(self.policy.learner_spec, obs, choice, self.policy.margin, self.policy.r_max) {
            Ok(0.0) => Ok(FeedbackValue::do_nothing()),
            Ok(r) => Ok(FeedbackValue::value(r)),
            Err(RealizeError::Infeasible { reward, r_max }) => Ok(FeedbackValue::value(reward.clamp(-r_max, r_max))),
            Err(e) => Err(e.into()),
        }
    }
}

/// Generate `n_dogs` taught dogs grouped into participants of
/// `cfg.dogs_per_participant` (the last participant may have fewer).
///
/// Dog `k` (counting across participants) runs with episode seed
/// `split_seed(seed, k)`.
pub fn generate_synthetic_logs(
    env: &EnvModel,
    spec: LearnerSpec,
    teacher: SyntheticTeacher,
    n_dogs: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<ParticipantRecord>, AnalysisError> {
    if n_dogs == 0 || cfg.dogs_per_participant == 0 {
        return Err(AnalysisError::Invalid("need at least one dog and one dog per participant".into()));
    }
    if let SyntheticTeacher::Noisy { p_flip } = teacher {
        if !(0.0..=1.0).contains(&p_flip) {
            return Err(AnalysisError::Invalid(format!("p_flip {p_flip} not in [0, 1]")));
        }
    }
    spec.validate().map_err(TeachingError::from)?;
    cfg.episode.validate()?;
    let goal = TeachingGoal::dog();
    goal.check_env(env)?;
    let vt: Arc<ValueTable> =
        Arc::new(solve_value_iteration(env, &goal, SolverConfig { epsilon: cfg.episode.epsilon, ..Default::default() })?);
    let policy = RealizedTeacherPolicy::new(vt, spec, cfg.margin, cfg.episode.r_max).map_err(TeachingError::from)?;
    let condition = Condition { learner: spec, sync: cfg.sync };

    let logs = (0..n_dogs)
        .into_par_iter()
        .map(|k| {
            let dog_seed = split_seed(seed, k as u64);
            let tags = LogTags {
                participant_id: Some(participant_id(cfg.id_prefix, seed, k / cfg.dogs_per_participant)),
                sync: Some(cfg.sync),
                dog_index: Some(k % cfg.dogs_per_participant),
            };
            let mut t = SynthTeacherPolicy { kind: teacher, policy: policy.clone(), rng: seeded(split_seed(dog_seed, 1)) };
            let learner = LearnerState::new(spec, env).map_err(TeachingError::from)?;
            Ok(run_tagged_episode(env, learner, &mut t, &goal, cfg.episode.with_seed(dog_seed), tags)?)
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;

    logs.chunks(cfg.dogs_per_participant)
        .enumerate()
        .map(|(i, chunk)| ParticipantRecord::new(participant_id(cfg.id_prefix, seed, i), condition, chunk.to_vec()))
        .collect()
}

fn participant_id(prefix: &str, seed: u64, i: usize) -> String {
    format!("{prefix}-{seed:x}-{i:04}")
}
