//! Solve the dog garden's abstract teaching MDP and print the teaching
//! dimension for a few exploration rates, together with the optimal first
//! responses.
//!
//! ```text
//! cargo run --release -p teachlab --example solve_teaching_dimension
//! ```

use std::time::Instant;

use teachlab::optimal::{solve_value_iteration, teaching_dimension, PreferenceProfile, SolverConfig};
use teachlab::{dog_env, ActionId, StateId, TeachingGoal};

fn main() {
    let env = dog_env();
    let goal = TeachingGoal::dog();
    for epsilon in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let start = Instant::now();
        let vt = solve_value_iteration(&env, &goal, SolverConfig { epsilon, ..Default::default() })
            .expect("value iteration converges on the dog garden");
        println!(
            "epsilon {epsilon:4.2}: teaching dimension {:.6} ({} sweeps, residual {:.1e}, {:?})",
            teaching_dimension(&vt, &env),
            vt.iterations(),
            vt.residual(),
            start.elapsed()
        );
    }

    let vt = solve_value_iteration(&env, &goal, SolverConfig::default()).unwrap();
    let start = PreferenceProfile::all_tied(4, 2);
    for (a, name) in [(ActionId::LEFT, "left"), (ActionId::RIGHT, "right")] {
        let next = if a == ActionId::LEFT { StateId(2) } else { StateId(3) };
        let choice = vt.choice(StateId(3), &start, a, next).unwrap();
        println!("first move {name}: place the taken entry {choice} the other action");
    }
}
