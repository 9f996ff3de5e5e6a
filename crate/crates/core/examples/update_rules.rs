//! One reward, four learners: how Q-learning and the two action-signaling
//! learners move a table entry.

use teachlab::{dog_env, ActionId, Experience, LearnerSpec, LearnerState, StateId};

fn main() {
    let env = dog_env();
    let step = Experience { s: StateId(2), a: ActionId::LEFT, s_next: StateId(1), reached_absorb: false, r: 0.5 };
    for spec in [LearnerSpec::q(0.9, 0.0), LearnerSpec::q(0.9, 0.9), LearnerSpec::As1 { kappa: 1.0 }, LearnerSpec::As2] {
        let mut learner = LearnerState::new(spec, &env).unwrap();
        learner.q.set(StateId(1), ActionId::LEFT, 0.4);
        learner.q.set(StateId(2), ActionId::LEFT, 0.2);
        let before = learner.q.get(step.s, step.a);
        for _ in 0..3 {
            learner.update(&step).unwrap();
        }
        println!("{:<10} Q(2, left): {before:.3} -> {:.4} after three rewards of 0.5", spec.to_string(), learner.q.get(step.s, step.a));
    }
}
