//! teachlab: teaching tabular learners with rewards.
//!
//! The crate covers the whole loop of a reward-teaching study:
//!
//! * [`env`]: rewardless finite MDPs and the 4-tile dog garden.
//! * [`learner`]: Q-learning, AS1 and AS2 learners with ε-greedy behavior.
//! * [`teaching`]: the teacher/learner interaction and session logs ([`log`]).
//! * [`optimal`]: the exact optimal teacher: rank abstraction, value
//!   iteration, reward realization and Monte Carlo checks.
//! * [`analysis`]: exclusion rules, condition statistics, the feedback
//!   permutation test and synthetic participants.
//! * [`session`]: the live experiment session logic behind the HTTP service.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod analysis;
pub mod env;
pub mod error;
pub mod learner;
pub mod log;
pub mod optimal;
pub mod rng;
pub mod session;
pub mod teaching;

pub use env::{dog_env, ActionId, EnvConfig, EnvModel, EnvStep, StateId};
pub use learner::{BehaviorPolicyParams, Experience, LearnerSpec, LearnerState, QTable, VisitCounts};
pub use teaching::{
    goal_reached, replay, run_episode, EpisodeConfig, FeedbackValue, Outcome, SessionLog, StepRecord, TeacherObservation, TeacherPolicy,
    TeachingGoal,
};
