//! Estimate the expected number of steps to teach the dog by simulation and
//! compare it with the solver's value.
//!
//! ```text
//! cargo run --release -p teachlab --example monte_carlo_td -- 20000
//! ```

use std::sync::Arc;

use teachlab::optimal::{monte_carlo_td, solve_value_iteration, teaching_dimension, RealizedTeacherPolicy, SolverConfig, DEFAULT_MARGIN};
use teachlab::{dog_env, EpisodeConfig, LearnerSpec, TeachingGoal};

fn main() {
    let n: usize = std::env::args().nth(1).map_or(10_000, |s| s.parse().expect("episode count"));
    let env = dog_env();
    let goal = TeachingGoal::dog();
    let vt = Arc::new(solve_value_iteration(&env, &goal, SolverConfig::default()).unwrap());
    let td = teaching_dimension(&vt, &env);

    let spec = LearnerSpec::q(0.1, 0.9);
    let policy = RealizedTeacherPolicy::new(vt, spec, DEFAULT_MARGIN, None).unwrap();
    let s = monte_carlo_td(&env, &goal, &policy, n, EpisodeConfig::unbounded(0.1, 7)).unwrap();

    println!("solver:      {td:.4}");
    println!("simulation:  {:.4} +- {:.4} over {} episodes ({spec})", s.mean_steps, s.std_err, s.n_episodes);
    println!("z = {:.2}, largest reward {:.3}", (s.mean_steps - td) / s.std_err, s.max_abs_reward);
}
