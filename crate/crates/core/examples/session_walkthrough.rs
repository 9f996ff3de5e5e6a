//! Drive one experiment session the way the web page does: look at the
//! pending move, preview a slider value, commit it, and finally export the
//! logs.

use teachlab::session::{FeedbackRequest, LearnerCondition, Phase, SessionConfig, SessionStore};

fn main() {
    let store = SessionStore::in_memory();
    let mut state = store.create_session(SessionConfig::new(LearnerCondition::Q45, true, 2024)).unwrap();
    let id = state.session_id.clone();
    println!("session {id}");

    while state.phase != Phase::SessionFinished {
        let pending = state.pending.as_ref().unwrap();
        let obs = &pending.observation;
        // punish moves away from the door, reward moves toward it
        let value = if pending.direction == Some(teachlab::session::Direction::Right) { 0.6 } else { -0.6 };
        let preview = store.preview_feedback(&id, value).unwrap();
        let greedy: Vec<_> = preview.tiles.iter().map(|t| t.greedy).collect();
        if state.dog_index == 0 && state.step_counter <= 5 {
            println!(
                "dog {} step {}: {} -> {} {:?}{}; preview after {value:+}: {greedy:?}",
                state.dog_index,
                state.step_counter,
                obs.s,
                obs.s_next,
                pending.direction,
                if pending.squirrel { " (squirrel!)" } else { "" }
            );
        }
        state = store.submit_feedback(&id, FeedbackRequest::value(value)).unwrap();
        if let Some(done) = state.just_finished {
            println!("dog {} finished: {:?}", done.dog_index, done.outcome);
        }
    }

    let logs = store.export_session(&id).unwrap();
    println!("exported {} logs with {} steps in total", logs.len(), logs.iter().map(|l| l.steps.len()).sum::<usize>());
}
