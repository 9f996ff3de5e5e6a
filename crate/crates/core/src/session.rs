//! Live experiment sessions.
//!
//! A session teaches `n_dogs` dogs in a row under one condition. The dog
//! moves on the server: after every piece of feedback the learner updates,
//! the goal is checked, and the next move is sampled before the response
//! goes out. The client only ever sees the resulting state.
//!
//! When a session store has a data directory, each session writes one
//! append-only NDJSON file in the teaching-log format, one line per event.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::env::{dog_env, ActionId, EnvModel, StateId};
use crate::error::SessionError;
use crate::learner::{LearnerSpec, LearnerState, QTable};
use crate::log::{LogAppender, LogLine, OutcomeLine};
use crate::rng::split_seed;
use crate::teaching::{Episode, EpisodeConfig, FeedbackValue, LogTags, Outcome, SessionLog, TeacherObservation, TeachingGoal};

/// Smallest normalizer for arrow lengths, so an all-zero table draws no arrows.
pub const ARROW_FLOOR: f64 = 0.1;

/// Slider range.
pub const SLIDER_MAX: f64 = 1.0;

/// The six learner conditions of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LearnerCondition {
    Q0,
    Q1,
    Q45,
    Q9,
    As1,
    As2,
}

impl LearnerCondition {
    pub const ALL: [LearnerCondition; 6] = [
        LearnerCondition::Q0,
        LearnerCondition::Q1,
        LearnerCondition::Q45,
        LearnerCondition::Q9,
        LearnerCondition::As1,
        LearnerCondition::As2,
    ];

    pub fn spec(self) -> LearnerSpec {
        match self {
            LearnerCondition::Q0 => LearnerSpec::q(0.9, 0.0),
            LearnerCondition::Q1 => LearnerSpec::q(0.9, 0.1),
            LearnerCondition::Q45 => LearnerSpec::q(0.9, 0.45),
            LearnerCondition::Q9 => LearnerSpec::q(0.9, 0.9),
            LearnerCondition::As1 => LearnerSpec::As1 { kappa: 1.0 },
            LearnerCondition::As2 => LearnerSpec::As2,
        }
    }

    pub fn from_spec(spec: LearnerSpec) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.spec() == spec)
    }

    pub fn tag(self) -> &'static str {
        match self {
            LearnerCondition::Q0 => "Q0",
            LearnerCondition::Q1 => "Q1",
            LearnerCondition::Q45 => "Q45",
            LearnerCondition::Q9 => "Q9",
            LearnerCondition::As1 => "AS1",
            LearnerCondition::As2 => "AS2",
        }
    }
}

impl fmt::Display for LearnerCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for LearnerCondition {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SessionError::BadRequest(format!("unknown learner condition {s:?}")))
    }
}

impl TryFrom<String> for LearnerCondition {
    type Error = SessionError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LearnerCondition> for String {
    fn from(c: LearnerCondition) -> String {
        c.tag().to_string()
    }
}

fn default_n_dogs() -> usize {
    3
}
fn default_max_steps() -> u64 {
    40
}
fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(rename = "learner_condition")]
    pub condition: LearnerCondition,
    pub sync: bool,
    #[serde(default = "default_n_dogs")]
    pub n_dogs: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Drawn at random when absent; the resolved value is echoed in the state.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SessionConfig {
    pub fn new(condition: LearnerCondition, sync: bool, seed: u64) -> Self {
        Self { condition, sync, n_dogs: 3, max_steps: 40, epsilon: 0.1, seed: Some(seed) }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.n_dogs == 0 {
            return Err(SessionError::BadRequest("n_dogs must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(SessionError::BadRequest("max_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(SessionError::BadRequest(format!("epsilon {} not in [0, 1]", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    AwaitingFeedback,
    /// Only ever reported in the response to the feedback that finished a
    /// dog when another dog follows; the stored session has already moved on
    /// to the next dog's first move.
    DogFinished,
    SessionFinished,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::AwaitingFeedback => "awaiting feedback",
            Phase::DogFinished => "between dogs",
            Phase::SessionFinished => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn of(a: ActionId) -> Option<Self> {
        match a {
            ActionId::LEFT => Some(Direction::Left),
            ActionId::RIGHT => Some(Direction::Right),
            _ => None,
        }
    }
}

/// One preference arrow on the scanner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub direction: Direction,
    /// `|Q| / max(max |Q|, ARROW_FLOOR)`, in `[0, 1]`.
    pub magnitude: f64,
    /// Drawn solid blue when true, dotted red when false.
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileDisplay {
    pub tile: usize,
    pub q: Vec<f64>,
    pub arrows: Vec<Arrow>,
    /// Strictly preferred direction; `None` on a tie.
    pub greedy: Option<Direction>,
    /// Greedy direction equals the target (the green cell).
    pub goal_match: bool,
}

/// The brain scanner: preference and action-plan rows for every tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScannerDisplay {
    pub tiles: Vec<TileDisplay>,
    pub scale: f64,
}

impl ScannerDisplay {
    pub fn of(q: &QTable, goal: &TeachingGoal) -> Self {
        let scale = q.max_abs().max(ARROW_FLOOR);
        let tiles = (0..q.n_states())
            .map(|s| {
                let s = StateId(s);
                let greedy = q.greedy_actions(s);
                let greedy = if greedy.len() == 1 { Direction::of(greedy[0]) } else { None };
                TileDisplay {
                    tile: s.0,
                    q: q.row(s).to_vec(),
                    arrows: q
                        .row(s)
                        .iter()
                        .enumerate()
                        .filter_map(|(a, v)| {
                            Some(Arrow { direction: Direction::of(ActionId(a))?, magnitude: v.abs() / scale, positive: *v >= 0.0 })
                        })
                        .collect(),
                    greedy,
                    goal_match: greedy.is_some() && greedy == Direction::of(goal.target(s)),
                }
            })
            .collect();
        Self { tiles, scale }
    }
}

/// The dog's pending move as shown to the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingMove {
    pub observation: TeacherObservation,
    pub direction: Option<Direction>,
    /// The move was exploration; the squirrel appears on that side.
    pub squirrel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinishedDog {
    pub dog_index: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub config: SessionConfig,
    pub dog_index: usize,
    pub phase: Phase,
    pub pending: Option<PendingMove>,
    /// Moves made by the current dog, including the pending one.
    pub step_counter: u64,
    pub display: ScannerDisplay,
    pub completed_dogs: Vec<FinishedDog>,
    /// Set on the response to the feedback that ended a dog.
    pub just_finished: Option<FinishedDog>,
}

/// Feedback for the pending move: a slider value or the do-nothing button.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub do_nothing: Option<bool>,
}

impl FeedbackRequest {
    pub fn value(v: f64) -> Self {
        Self { value: Some(v), do_nothing: None }
    }

    pub fn do_nothing() -> Self {
        Self { value: None, do_nothing: Some(true) }
    }

    pub fn to_feedback(&self) -> Result<FeedbackValue, SessionError> {
        match (self.value, self.do_nothing) {
            (Some(v), None | Some(false)) => Ok(FeedbackValue::value(check_slider(v)?)),
            (None, Some(true)) => Ok(FeedbackValue::do_nothing()),
            _ => Err(SessionError::BadRequest("give exactly one of value or do_nothing: true".into())),
        }
    }
}

fn check_slider(v: f64) -> Result<f64, SessionError> {
    if v.is_finite() && v.abs() <= SLIDER_MAX {
        Ok(v)
    } else {
        Err(SessionError::BadRequest(format!("feedback {v} outside [-{SLIDER_MAX}, {SLIDER_MAX}]")))
    }
}

/// One participant's session.
#[derive(Debug)]
pub struct Session {
    id: String,
    config: SessionConfig,
    seed: u64,
    env: EnvModel,
    goal: TeachingGoal,
    dog_index: usize,
    episode: Episode,
    pending: Option<TeacherObservation>,
    finished: Vec<SessionLog>,
    appender: Option<LogAppender>,
}

impl Session {
    /// Start dog 0 and make its first move.
    pub fn start(id: String, mut config: SessionConfig, log_path: Option<&Path>) -> Result<Self, SessionError> {
        config.validate()?;
        let seed = *config.seed.get_or_insert_with(rand::random);
        let env = dog_env();
        let goal = TeachingGoal::dog();
        let appender = log_path.map(LogAppender::open).transpose()?;
        let episode = Self::new_dog(&env, &goal, &config, seed, &id, 0)?;
        let mut s = Self { id, config, seed, env, goal, dog_index: 0, episode, pending: None, finished: Vec::new(), appender };
        s.append(LogLine::Header(s.episode.log().header.clone()))?;
        s.advance()?;
        Ok(s)
    }

    fn new_dog(env: &EnvModel, goal: &TeachingGoal, cfg: &SessionConfig, seed: u64, id: &str, dog: usize) -> Result<Episode, SessionError> {
        let learner = LearnerState::new(cfg.condition.spec(), env).map_err(crate::error::TeachingError::from)?;
        let ep_cfg =
            EpisodeConfig { epsilon: cfg.epsilon, max_steps: cfg.max_steps, seed: split_seed(seed, dog as u64), r_max: Some(SLIDER_MAX) };
        let tags = LogTags { participant_id: Some(id.to_string()), sync: Some(cfg.sync), dog_index: Some(dog) };
        Ok(Episode::new(env, learner, goal, ep_cfg, tags)?)
    }

    fn append(&mut self, line: LogLine) -> Result<(), SessionError> {
        if let Some(a) = self.appender.as_mut() {
            a.append(&line)?;
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<(), SessionError> {
        self.pending = Some(self.episode.next_move()?);
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phase(&self) -> Phase {
        if self.pending.is_some() {
            Phase::AwaitingFeedback
        } else {
            Phase::SessionFinished
        }
    }

    pub fn learner(&self) -> &LearnerState {
        self.episode.learner()
    }

    pub fn pending(&self) -> Option<&TeacherObservation> {
        self.pending.as_ref()
    }

    pub fn state(&self) -> SessionState {
        let pending =
            self.pending.as_ref().map(|o| PendingMove { observation: o.clone(), direction: Direction::of(o.a), squirrel: o.explored });
        SessionState {
            session_id: self.id.clone(),
            config: self.config,
            dog_index: self.dog_index,
            phase: self.phase(),
            step_counter: self.episode.log().steps.len() as u64 + u64::from(pending.is_some()),
            pending,
            display: ScannerDisplay::of(&self.episode.learner().q, &self.goal),
            completed_dogs: self
                .finished
                .iter()
                .enumerate()
                .map(|(i, l)| FinishedDog { dog_index: i, outcome: l.outcome.expect("finished logs have outcomes") })
                .collect(),
            just_finished: None,
        }
    }

    /// Scanner the learner would show after feedback `value`. Changes nothing.
    pub fn preview(&self, value: f64) -> Result<ScannerDisplay, SessionError> {
        if !self.config.sync {
            return Err(SessionError::PreviewForbidden);
        }
        let value = check_slider(value)?;
        let obs = self.pending.as_ref().ok_or(SessionError::Conflict(self.phase().name()))?;
        let next = self.episode.preview(obs, FeedbackValue::value(value))?;
        Ok(ScannerDisplay::of(&next.q, &self.goal))
    }

    /// Apply feedback to the pending move, then move on: the next move of this
    /// dog, the first move of the next dog, or the end of the session.
    pub fn submit(&mut self, req: FeedbackRequest) -> Result<SessionState, SessionError> {
        let fb = req.to_feedback()?;
        let obs = self.pending.take().ok_or(SessionError::Conflict(Phase::SessionFinished.name()))?;
        let record = match self.episode.apply(obs.clone(), fb) {
            Ok(r) => r.clone(),
            Err(e) => {
                self.pending = Some(obs);
                return Err(e.into());
            }
        };
        self.append(LogLine::Step(record))?;
        let Some(outcome) = self.episode.outcome() else {
            self.advance()?;
            return Ok(self.state());
        };
        self.append(LogLine::Outcome(OutcomeLine { outcome }))?;
        let finished = FinishedDog { dog_index: self.dog_index, outcome };
        let next_dog = self.dog_index + 1;
        let more = next_dog < self.config.n_dogs;
        let replacement =
            if more { Self::new_dog(&self.env, &self.goal, &self.config, self.seed, &self.id, next_dog)? } else { self.episode.clone() };
        let done = std::mem::replace(&mut self.episode, replacement);
        self.finished.push(done.into_log());
        if more {
            self.dog_index = next_dog;
            self.append(LogLine::Header(self.episode.log().header.clone()))?;
            self.advance()?;
        }
        let mut state = self.state();
        state.just_finished = Some(finished);
        if more {
            state.phase = Phase::DogFinished;
        }
        Ok(state)
    }

    /// Finished dogs plus the current dog's log so far.
    pub fn export(&self) -> Vec<SessionLog> {
        let mut logs = self.finished.clone();
        if self.pending.is_some() {
            logs.push(self.episode.log().clone());
        }
        logs
    }
}

/// All live sessions. Each session sits behind its own lock, so requests to
/// different sessions never wait on each other.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    data_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(data_dir: Option<PathBuf>) -> Result<Self, SessionError> {
        if let Some(d) = &data_dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self { sessions: RwLock::default(), data_dir })
    }

    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    /// Path of a session's log file, when persisting.
    pub fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.ndjson")))
    }

    pub fn create_session(&self, cfg: SessionConfig) -> Result<SessionState, SessionError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::start(id.clone(), cfg, self.log_path(&id).as_deref())?;
        let state = session.state();
        self.sessions.write().expect("session map poisoned").insert(id, Arc::new(Mutex::new(session)));
        Ok(state)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions.read().expect("session map poisoned").get(id).cloned().ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Result<T, SessionError> {
        let s = self.get(id)?;
        let mut guard = s.lock().expect("session poisoned");
        Ok(f(&mut guard))
    }

    pub fn session_state(&self, id: &str) -> Result<SessionState, SessionError> {
        self.with_session(id, |s| s.state())
    }

    pub fn preview_feedback(&self, id: &str, value: f64) -> Result<ScannerDisplay, SessionError> {
        self.with_session(id, |s| s.preview(value))?
    }

    pub fn submit_feedback(&self, id: &str, req: FeedbackRequest) -> Result<SessionState, SessionError> {
        self.with_session(id, |s| s.submit(req))?
    }

    pub fn export_session(&self, id: &str) -> Result<Vec<SessionLog>, SessionError> {
        self.with_session(id, |s| s.export())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
