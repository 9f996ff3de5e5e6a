//! The reward-teaching interaction.
//!
//! Each step the learner picks an ε-greedy action, the environment moves, the
//! teacher sees `(s, a, s', Q)` and answers with a reward, the learner updates,
//! and the goal is checked. Every step costs one unit; teaching ends the first
//! time the learner's table enters the target set or when the step budget is
//! spent.

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvConfig, EnvModel, StateId};
use crate::error::{LogError, TeachingError};
use crate::learner::{BehaviorPolicyParams, Experience, LearnerSpec, LearnerState, QTable, VisitCounts};
use crate::rng::{seeded, RandomSource};

const REPLAY_TOLERANCE: f64 = 1e-12;

/// What the teacher sees before choosing a reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherObservation {
    pub step_index: usize,
    pub s: StateId,
    pub a: ActionId,
    /// The move was an exploration step (the squirrel in the human task).
    pub explored: bool,
    pub s_next: StateId,
    pub reached_absorb: bool,
    /// Learner table before the pending update.
    pub q_snapshot: QTable,
    /// Learner visit counts before the pending update.
    pub visits: VisitCounts,
}

impl TeacherObservation {
    pub fn experience(&self, r: f64) -> Experience {
        Experience { s: self.s, a: self.a, s_next: self.s_next, reached_absorb: self.reached_absorb, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackValue {
    pub value: f64,
    pub is_do_nothing: bool,
}

impl FeedbackValue {
    pub fn value(value: f64) -> Self {
        Self { value, is_do_nothing: false }
    }

    pub fn do_nothing() -> Self {
        Self { value: 0.0, is_do_nothing: true }
    }

    pub fn check(&self, r_max: Option<f64>) -> Result<(), TeachingError> {
        if self.is_do_nothing && self.value != 0.0 {
            return Err(TeachingError::BadDoNothing(self.value));
        }
        let bound = r_max.unwrap_or(f64::INFINITY);
        if !self.value.is_finite() || self.value.abs() > bound {
            return Err(TeachingError::FeedbackOutOfRange { value: self.value, r_max: bound });
        }
        Ok(())
    }
}

/// Target action per state; reached when each is the strict row maximum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachingGoal {
    pub target_action: Vec<ActionId>,
}

impl TeachingGoal {
    /// "Go home from every tile": Right everywhere.
    pub fn dog() -> Self {
        Self { target_action: vec![ActionId::RIGHT; crate::env::DOG_TILES] }
    }

    pub fn target(&self, s: StateId) -> ActionId {
        self.target_action[s.0]
    }

    pub fn check_env(&self, env: &EnvModel) -> Result<(), TeachingError> {
        if self.target_action.len() != env.n_states() {
            return Err(TeachingError::BadConfig(format!(
                "goal covers {} states, environment has {}",
                self.target_action.len(),
                env.n_states()
            )));
        }
        for a in &self.target_action {
            env.check_action(*a)?;
        }
        Ok(())
    }
}

/// True iff at every state the target action is strictly above all others.
pub fn goal_reached(q: &QTable, goal: &TeachingGoal) -> bool {
    (0..q.n_states()).all(|s| {
        let s = StateId(s);
        let target = goal.target(s);
        let tv = q.get(s, target);
        (0..q.n_actions()).all(|a| a == target.0 || tv > q.get(s, ActionId(a)))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub epsilon: f64,
    pub max_steps: u64,
    pub seed: u64,
    /// Feedback bound; `None` (serialized as null) means unbounded.
    pub r_max: Option<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, max_steps: 40, seed: 0, r_max: Some(1.0) }
    }
}

impl EpisodeConfig {
    /// No step cap and unbounded rewards.
    pub fn unbounded(epsilon: f64, seed: u64) -> Self {
        Self { epsilon, max_steps: u64::MAX, seed, r_max: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<BehaviorPolicyParams, TeachingError> {
        if self.max_steps == 0 {
            return Err(TeachingError::BadConfig("max_steps must be at least 1".into()));
        }
        if let Some(r) = self.r_max {
            if r.is_nan() || r <= 0.0 {
                return Err(TeachingError::BadConfig(format!("r_max {r} must be positive")));
            }
        }
        Ok(BehaviorPolicyParams::new(self.epsilon)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub s: StateId,
    pub a: ActionId,
    pub explored: bool,
    pub s_next: StateId,
    pub reached_absorb: bool,
    pub feedback: FeedbackValue,
    pub q_before: QTable,
    pub q_after: QTable,
    pub goal_after: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Success { steps_used: usize },
    Timeout,
}

impl Outcome {
    pub fn steps_used(&self) -> Option<usize> {
        match self {
            Outcome::Success { steps_used } => Some(*steps_used),
            Outcome::Timeout => None,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success { .. })
    }
}

/// Optional labels attached to logs produced by the experiment service or
/// the synthetic generator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogTags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dog_index: Option<usize>,
}

/// Everything needed to reproduce an episode, written as the first log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub learner_spec: LearnerSpec,
    pub episode_config: EpisodeConfig,
    pub goal: TeachingGoal,
    pub env: EnvConfig,
    pub initial_q: QTable,
    pub initial_visits: VisitCounts,
    #[serde(default, flatten)]
    pub tags: LogTags,
}

/// One teaching episode. `outcome` is `None` while the episode is still running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
    pub outcome: Option<Outcome>,
}

impl SessionLog {
    pub fn learner_spec(&self) -> LearnerSpec {
        self.header.learner_spec
    }

    pub fn is_complete(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn do_nothing_count(&self) -> usize {
        self.steps.iter().filter(|s| s.feedback.is_do_nothing).count()
    }

    pub fn initial_learner(&self) -> Result<LearnerState, TeachingError> {
        let mut l = LearnerState::with_table(self.header.learner_spec, self.header.initial_q.clone())?;
        l.visits = self.header.initial_visits.clone();
        Ok(l)
    }
}

/// Maps each observation to a reward. Implementations may keep private state
/// but must not look at anything besides the observation and that state.
pub trait TeacherPolicy {
    fn feedback(&mut self, obs: &TeacherObservation) -> Result<FeedbackValue, TeachingError>;
}

impl<F> TeacherPolicy for F
where
    F: FnMut(&TeacherObservation) -> Result<FeedbackValue, TeachingError>,
{
    fn feedback(&mut self, obs: &TeacherObservation) -> Result<FeedbackValue, TeachingError> {
        self(obs)
    }
}

/// Teacher that never gives feedback.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoNothingTeacher;

impl TeacherPolicy for DoNothingTeacher {
    fn feedback(&mut self, _obs: &TeacherObservation) -> Result<FeedbackValue, TeachingError> {
        Ok(FeedbackValue::do_nothing())
    }
}

/// A live episode that can be advanced one move at a time.
///
/// [`run_episode`] drives it with a [`TeacherPolicy`]; the session service
/// drives it with human feedback.
#[derive(Debug, Clone)]
pub struct Episode {
    env: EnvModel,
    goal: TeachingGoal,
    behavior: BehaviorPolicyParams,
    rng: RandomSource,
    learner: LearnerState,
    pos: StateId,
    log: SessionLog,
}

impl Episode {
    pub fn new(
        env: &EnvModel,
        learner: LearnerState,
        goal: &TeachingGoal,
        cfg: EpisodeConfig,
        tags: LogTags,
    ) -> Result<Self, TeachingError> {
        let behavior = cfg.validate()?;
        goal.check_env(env)?;
        if learner.q.n_states() != env.n_states() || learner.q.n_actions() != env.n_actions() {
            return Err(TeachingError::BadConfig("learner table does not match the environment".into()));
        }
        let mut rng = seeded(cfg.seed);
        let pos = env.initial_state(&mut rng);
        let header = LogHeader {
            learner_spec: learner.spec,
            episode_config: cfg,
            goal: goal.clone(),
            env: env.to_config(),
            initial_q: learner.q.clone(),
            initial_visits: learner.visits.clone(),
            tags,
        };
        Ok(Self {
            env: env.clone(),
            goal: goal.clone(),
            behavior,
            rng,
            learner,
            pos,
            log: SessionLog { header, steps: Vec::new(), outcome: None },
        })
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    pub fn position(&self) -> StateId {
        self.pos
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.log.outcome
    }

    pub fn goal(&self) -> &TeachingGoal {
        &self.goal
    }

    /// Sample the learner's next move and the environment's response.
    pub fn next_move(&mut self) -> Result<TeacherObservation, TeachingError> {
        if self.log.outcome.is_some() {
            return Err(TeachingError::BadConfig("episode already finished".into()));
        }
        let (a, explored) = self.learner.select_action(self.pos, self.behavior, &mut self.rng);
        let step = self.env.step(self.pos, a, &mut self.rng)?;
        Ok(TeacherObservation {
            step_index: self.log.steps.len(),
            s: self.pos,
            a,
            explored,
            s_next: step.next_state,
            reached_absorb: step.reached_absorb,
            q_snapshot: self.learner.q.clone(),
            visits: self.learner.visits.clone(),
        })
    }

    /// Learner state that feedback `fb` would produce for `obs`, without committing.
    pub fn preview(&self, obs: &TeacherObservation, fb: FeedbackValue) -> Result<LearnerState, TeachingError> {
        fb.check(self.log.header.episode_config.r_max)?;
        Ok(self.learner.updated(&obs.experience(fb.value))?)
    }

    /// Commit feedback for the pending move `obs` (which must come from
    /// [`Episode::next_move`]). Returns the new step record.
    pub fn apply(&mut self, obs: TeacherObservation, fb: FeedbackValue) -> Result<&StepRecord, TeachingError> {
        fb.check(self.log.header.episode_config.r_max)?;
        let q_before = self.learner.q.clone();
        self.learner.update(&obs.experience(fb.value))?;
        let goal_after = goal_reached(&self.learner.q, &self.goal);
        self.log.steps.push(StepRecord {
            step_index: obs.step_index,
            s: obs.s,
            a: obs.a,
            explored: obs.explored,
            s_next: obs.s_next,
            reached_absorb: obs.reached_absorb,
            feedback: fb,
            q_before,
            q_after: self.learner.q.clone(),
            goal_after,
        });
        self.pos = obs.s_next;
        let used = self.log.steps.len();
        if goal_after {
            self.log.outcome = Some(Outcome::Success { steps_used: used });
        } else if used as u64 >= self.log.header.episode_config.max_steps {
            self.log.outcome = Some(Outcome::Timeout);
        }
        Ok(self.log.steps.last().expect("just pushed"))
    }
}

/// Run one teaching episode to success or the step cap.
pub fn run_episode(
    env: &EnvModel,
    learner: LearnerState,
    teacher: &mut dyn TeacherPolicy,
    goal: &TeachingGoal,
    cfg: EpisodeConfig,
) -> Result<SessionLog, TeachingError> {
    run_tagged_episode(env, learner, teacher, goal, cfg, LogTags::default())
}

pub fn run_tagged_episode(
    env: &EnvModel,
    learner: LearnerState,
    teacher: &mut dyn TeacherPolicy,
    goal: &TeachingGoal,
    cfg: EpisodeConfig,
    tags: LogTags,
) -> Result<SessionLog, TeachingError> {
    let mut ep = Episode::new(env, learner, goal, cfg, tags)?;
    while ep.outcome().is_none() {
        let obs = ep.next_move()?;
        let fb = teacher.feedback(&obs)?;
        ep.apply(obs, fb)?;
    }
    Ok(ep.into_log())
}

fn corrupted(step: usize, reason: impl Into<String>) -> LogError {
    LogError::Corrupted { step, reason: reason.into() }
}

/// Re-run the recorded moves and feedback through the learner's update rule
/// and check every recorded table, flag and the outcome.
pub fn replay(log: &SessionLog) -> Result<SessionLog, LogError> {
    let h = &log.header;
    let env = EnvModel::from_config(h.env.clone()).map_err(|e| corrupted(0, e.to_string()))?;
    h.episode_config.validate().map_err(|e| corrupted(0, e.to_string()))?;
    h.goal.check_env(&env).map_err(|e| corrupted(0, e.to_string()))?;
    let mut learner = log.initial_learner().map_err(|e| corrupted(0, e.to_string()))?;
    let mut steps = Vec::with_capacity(log.steps.len());
    let mut first_success = None;
    for (i, rec) in log.steps.iter().enumerate() {
        if rec.step_index != i {
            return Err(corrupted(i, format!("step_index {} out of sequence", rec.step_index)));
        }
        if let Some(prev) = steps.last().map(|p: &StepRecord| p.s_next) {
            if rec.s != prev {
                return Err(corrupted(i, format!("starts at {} but previous step ended at {}", rec.s, prev)));
            }
        } else if env.check_state(rec.s).is_err() || env.initial()[rec.s.0] == 0.0 {
            return Err(corrupted(i, format!("{} is not a possible start state", rec.s)));
        }
        env.check_action(rec.a).map_err(|e| corrupted(i, e.to_string()))?;
        let possible =
            env.successors(rec.s, rec.a).iter().any(|(st, _)| st.next_state == rec.s_next && st.reached_absorb == rec.reached_absorb);
        if !possible {
            return Err(corrupted(i, "transition impossible in the recorded environment"));
        }
        rec.feedback.check(h.episode_config.r_max).map_err(|e| corrupted(i, e.to_string()))?;
        let before_diff = learner.q.max_abs_diff(&rec.q_before).unwrap_or(f64::INFINITY);
        if before_diff > REPLAY_TOLERANCE {
            return Err(corrupted(i, format!("q_before differs from replayed table by {before_diff:e}")));
        }
        let q_before = learner.q.clone();
        learner
            .update(&Experience { s: rec.s, a: rec.a, s_next: rec.s_next, reached_absorb: rec.reached_absorb, r: rec.feedback.value })
            .map_err(|e| corrupted(i, e.to_string()))?;
        let after_diff = learner.q.max_abs_diff(&rec.q_after).unwrap_or(f64::INFINITY);
        if after_diff > REPLAY_TOLERANCE {
            return Err(corrupted(i, format!("q_after differs from replayed table by {after_diff:e}")));
        }
        let goal_after = goal_reached(&learner.q, &h.goal);
        if goal_after != rec.goal_after {
            return Err(corrupted(i, "goal_after flag disagrees with the replayed table"));
        }
        if first_success.is_some() {
            return Err(corrupted(i, "steps recorded after the goal was reached"));
        }
        if goal_after {
            first_success = Some(i + 1);
        }
        steps.push(StepRecord { q_before, q_after: learner.q.clone(), goal_after, ..rec.clone() });
    }
    let n = steps.len();
    match (log.outcome, first_success) {
        (Some(Outcome::Success { steps_used }), Some(k)) if steps_used == k => {}
        (Some(Outcome::Timeout), None) if n as u64 == h.episode_config.max_steps => {}
        (None, None) if (n as u64) < h.episode_config.max_steps => {}
        (recorded, _) => {
            return Err(corrupted(n, format!("outcome {recorded:?} inconsistent with {n} replayed steps")));
        }
    }
    Ok(SessionLog { header: h.clone(), steps, outcome: log.outcome })
}
