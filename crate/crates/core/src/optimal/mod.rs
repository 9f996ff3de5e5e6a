//! Optimal reward teaching.
//!
//! [`rank`] collapses Q-tables to per-state action orderings, [`solver`] runs
//! value iteration on the resulting finite teaching MDP, [`realize`] turns the
//! solver's placements into concrete rewards for a particular learner, and
//! [`monte_carlo`] checks the solver against simulation.

pub mod monte_carlo;
pub mod rank;
pub mod realize;
pub mod solver;

pub use monte_carlo::{monte_carlo_logs, monte_carlo_td, reference_learners, verify_equivalence, EquivalenceReport, MonteCarloSummary};
pub use rank::{abstract_profile, order_equivalent, rank_of, PreferenceProfile, RankAction, Relation, WeakOrder};
pub use realize::{realize_reward, RealizedTeacherPolicy, DEFAULT_MARGIN};
pub use solver::{solve_value_iteration, teaching_dimension, AbstractTeachingMdp, SolverConfig, ValueTable};
