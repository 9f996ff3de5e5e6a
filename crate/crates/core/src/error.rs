use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("state {state} out of range (environment has {n_states} states)")]
    InvalidState { state: usize, n_states: usize },
    #[error("action {action} out of range (environment has {n_actions} actions)")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("invalid learner parameters: {0}")]
    InvalidSpec(String),
    #[error("operation needs a {expected} learner, got {got}")]
    WrongVariant { expected: &'static str, got: &'static str },
    #[error("invalid learner spec string {0:?} (expected q:ALPHA:GAMMA, as1[:KAPPA] or as2)")]
    Parse(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealizeError {
    #[error("reward {reward:.6} needed for the chosen rank exceeds the bound {r_max}")]
    Infeasible { reward: f64, r_max: f64 },
    #[error("no finite reward reaches the chosen rank")]
    Unreachable,
    #[error("rank placement {slot} does not exist for this state")]
    BadPlacement { slot: u8 },
    #[error("observation is outside the solved teaching problem: {0}")]
    Uncovered(String),
    #[error("margin must be positive and finite, got {0}")]
    BadMargin(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TeachingError {
    #[error("teacher emitted {value} outside [-{r_max}, {r_max}]")]
    FeedbackOutOfRange { value: f64, r_max: f64 },
    #[error("teacher emitted a do-nothing with non-zero value {0}")]
    BadDoNothing(f64),
    #[error("episode config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log corrupted at step {step}: {reason}")]
    Corrupted { step: usize, reason: String },
    #[error("malformed log line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Teaching(#[from] TeachingError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("value iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("abstract teaching state space too large: {0} states")]
    TooLarge(u128),
    #[error("solver config: {0}")]
    BadConfig(String),
    #[error("goal does not match the environment: {0}")]
    BadGoal(String),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("participant {0} gave no feedback to permute")]
    EmptyFeedback(String),
    #[error("n_episodes must be at least 1")]
    NoEpisodes,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Teaching(#[from] TeachingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("live preview is disabled for this session")]
    PreviewForbidden,
    #[error("session is {0}, cannot accept this request")]
    Conflict(&'static str),
    #[error("session {0} not found")]
    NotFound(String),
    #[error(transparent)]
    Teaching(#[from] TeachingError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
