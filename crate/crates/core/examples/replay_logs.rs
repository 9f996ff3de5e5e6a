//! Write teaching logs to NDJSON, read them back and replay them. A single
//! altered reward is caught.

use teachlab::analysis::{generate_synthetic_logs, SynthConfig, SyntheticTeacher};
use teachlab::log::{read_log_file, write_log_file};
use teachlab::{dog_env, replay, FeedbackValue, LearnerSpec};

fn main() {
    let records = generate_synthetic_logs(&dog_env(), LearnerSpec::As2, SyntheticTeacher::Optimal, 3, 1, &SynthConfig::default()).unwrap();
    let path = std::env::temp_dir().join("teachlab-replay-example.ndjson");
    write_log_file(&path, &records[0].logs).unwrap();

    let mut logs = read_log_file(&path).unwrap();
    for (i, log) in logs.iter().enumerate() {
        println!("dog {i}: {} steps, {:?}, replay {}", log.steps.len(), log.outcome, if replay(log).is_ok() { "ok" } else { "FAILED" });
    }
    logs[0].steps[0].feedback = FeedbackValue::value(0.9);
    println!("after editing one reward: {}", replay(&logs[0]).unwrap_err());
    std::fs::remove_file(path).ok();
}
