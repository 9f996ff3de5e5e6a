//! Teach five quite different learners with one solved policy and the same
//! seeds. Their step counts agree because the policy only looks at action
//! orderings.

use teachlab::optimal::{reference_learners, solve_value_iteration, verify_equivalence, SolverConfig, DEFAULT_MARGIN};
use teachlab::{dog_env, EpisodeConfig, TeachingGoal};

fn main() {
    let env = dog_env();
    let goal = TeachingGoal::dog();
    let vt = solve_value_iteration(&env, &goal, SolverConfig::default()).unwrap();
    let report =
        verify_equivalence(&env, &goal, vt.into(), &reference_learners(), DEFAULT_MARGIN, 5_000, EpisodeConfig::unbounded(0.1, 11))
            .unwrap();
    for s in &report.summaries {
        println!(
            "{:<12} mean {:.3}  95% CI ({:.3}, {:.3})  max |r| {:.3}",
            s.learner.to_string(),
            s.mean_steps,
            s.ci95.0,
            s.ci95.1,
            s.max_abs_reward
        );
    }
    let same = report.summaries.windows(2).all(|w| w[0].steps == w[1].steps);
    println!("intervals overlap: {}; identical step sequences: {same}", report.all_overlap);
}
