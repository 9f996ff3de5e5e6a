mod common;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use teachlab::analysis::{
    compute_condition_stats, exclusion_filter, generate_synthetic_logs, load_records, optimal_length, permutation_test, Condition,
    ExclusionReason, ParticipantRecord, SynthConfig, SyntheticTeacher, DO_NOTHING_THRESHOLD,
};
use teachlab::error::{AnalysisError, TeachingError};
use teachlab::log::write_log_file;
use teachlab::optimal::RealizedTeacherPolicy;
use teachlab::rng::seeded;
use teachlab::teaching::DoNothingTeacher;
use teachlab::{
    dog_env, run_episode, EpisodeConfig, FeedbackValue, LearnerSpec, LearnerState, Outcome, SessionLog, TeacherObservation, TeachingGoal,
};

const SPEC: LearnerSpec = LearnerSpec::QLearning { alpha: 0.9, gamma: 0.0 };

fn optimal_dog(seed: u64) -> SessionLog {
    let env = dog_env();
    let mut policy = RealizedTeacherPolicy::new(common::solved(0.1), SPEC, 0.05, Some(1.0)).unwrap();
    run_episode(&env, LearnerState::new(SPEC, &env).unwrap(), &mut policy, &TeachingGoal::dog(), EpisodeConfig::default().with_seed(seed))
        .unwrap()
}

/// A dog that times out after `idle` do-nothing steps and `40 - idle` small rewards.
fn idle_dog(idle: usize, seed: u64) -> SessionLog {
    let env = dog_env();
    let mut teacher = |obs: &TeacherObservation| -> Result<FeedbackValue, TeachingError> {
        Ok(if obs.step_index < idle { FeedbackValue::do_nothing() } else { FeedbackValue::value(-0.01) })
    };
    run_episode(&env, LearnerState::new(SPEC, &env).unwrap(), &mut teacher, &TeachingGoal::dog(), EpisodeConfig::default().with_seed(seed))
        .unwrap()
}

fn record(id: &str, logs: Vec<SessionLog>) -> ParticipantRecord {
    ParticipantRecord::new(id, Condition { learner: SPEC, sync: true }, logs).unwrap()
}

fn with_outcome(mut log: SessionLog, outcome: Option<Outcome>) -> SessionLog {
    log.outcome = outcome;
    log
}

#[test]
fn quick_dogs_are_dropped() {
    let limit = optimal_length(&dog_env(), &TeachingGoal::dog(), 0.1).unwrap();
    let quick = (0..).map(optimal_dog).find(|l| l.outcome.and_then(|o| o.steps_used()).is_some_and(|s| s < limit)).unwrap();
    let slow = (1000..).map(optimal_dog).find(|l| l.outcome.and_then(|o| o.steps_used()).is_some_and(|s| s >= limit)).unwrap();
    let report = exclusion_filter(&[record("p", vec![quick, slow.clone()])], limit, DO_NOTHING_THRESHOLD);
    assert_eq!(report.count(ExclusionReason::FasterThanOptimal), 1);
    assert_eq!(report.excluded[0].dog, Some(0));
    assert_eq!(report.kept[0].logs, vec![slow]);
}

#[test]
fn do_nothing_threshold_drops_the_participant() {
    let below = idle_dog(DO_NOTHING_THRESHOLD - 1, 1);
    let at = idle_dog(DO_NOTHING_THRESHOLD, 2);
    assert_eq!(below.do_nothing_count(), DO_NOTHING_THRESHOLD - 1);
    assert_eq!(idle_dog(37, 3).do_nothing_count(), 37);
    let report = exclusion_filter(&[record("a", vec![below.clone()]), record("b", vec![below.clone(), at])], 9, DO_NOTHING_THRESHOLD);
    assert_eq!(report.kept.len(), 1);
    assert_eq!(report.kept[0].participant_id, "a");
    assert_eq!(report.excluded.len(), 1);
    assert_eq!(report.excluded[0].reason, ExclusionReason::DoNothingOveruse);
    assert_eq!(report.excluded[0].dog, None);
    let all_idle = exclusion_filter(&[record("c", vec![run_idle(4)])], 9, DO_NOTHING_THRESHOLD);
    assert_eq!(all_idle.count(ExclusionReason::DoNothingOveruse), 1);
}

fn run_idle(seed: u64) -> SessionLog {
    let env = dog_env();
    run_episode(
        &env,
        LearnerState::new(SPEC, &env).unwrap(),
        &mut DoNothingTeacher,
        &TeachingGoal::dog(),
        EpisodeConfig::default().with_seed(seed),
    )
    .unwrap()
}

#[test]
fn broken_and_unfinished_logs() {
    let mut broken = optimal_dog(5);
    broken.steps[0].feedback = FeedbackValue::value(0.77);
    let mut unfinished = with_outcome(idle_dog(10, 6), None);
    unfinished.steps.truncate(15);
    let report = exclusion_filter(&[record("x", vec![broken]), record("y", vec![unfinished])], 9, DO_NOTHING_THRESHOLD);
    assert_eq!(report.count(ExclusionReason::ExperimentError), 1);
    assert_eq!(report.count(ExclusionReason::Incomplete), 1);
    assert!(report.kept.is_empty());
}

#[test]
fn clean_records_pass_untouched_and_filtering_is_idempotent() {
    let recs: Vec<_> = (0..5).map(|i| record(&format!("p{i}"), vec![idle_dog(10, i), idle_dog(20, 100 + i)])).collect();
    let report = exclusion_filter(&recs, 9, DO_NOTHING_THRESHOLD);
    assert!(report.excluded.is_empty());
    assert_eq!(report.kept, recs);

    let mixed = generate_synthetic_logs(&dog_env(), SPEC, SyntheticTeacher::Optimal, 30, 7, &SynthConfig::default()).unwrap();
    let once = exclusion_filter(&mixed, 9, DO_NOTHING_THRESHOLD);
    let twice = exclusion_filter(&once.kept, 9, DO_NOTHING_THRESHOLD);
    assert!(twice.excluded.is_empty());
    assert_eq!(twice.kept, once.kept);
    let dropped_dogs: usize = once.excluded.iter().map(|e| if e.dog.is_some() { 1 } else { 0 }).sum();
    assert_eq!(once.kept_dogs() + dropped_dogs, 30);
}

#[test]
fn half_success_table_row() {
    let base = idle_dog(0, 8);
    let logs: Vec<SessionLog> = (0..60)
        .map(|i| with_outcome(base.clone(), Some(if i % 2 == 0 { Outcome::Success { steps_used: 20 } } else { Outcome::Timeout })))
        .collect();
    let recs: Vec<_> = logs.chunks(3).enumerate().map(|(i, c)| record(&format!("p{i}"), c.to_vec())).collect();
    let stats = compute_condition_stats(&recs);
    let row = stats.get("Q0", true).unwrap();
    assert_eq!((row.n_subjects, row.n_dogs, row.n_success), (20, 60, 30));
    assert_eq!(row.success_rate, 0.5);
    assert_eq!(row.avg_steps, Some(20.0));
    assert_eq!(row.avg_steps_ci, Some((20.0, 20.0)));
    let (lo, hi) = row.success_ci;
    // Wilson by hand: (p + z²/2n ± z·sqrt(p(1-p)/n + z²/4n²)) / (1 + z²/n)
    let z = Normal::standard().inverse_cdf(0.975);
    let n = 60.0;
    let c = 0.5 + z * z / (2.0 * n);
    let h = z * (0.25 / n + z * z / (4.0 * n * n)).sqrt();
    let d = 1.0 + z * z / n;
    assert!((lo - (c - h) / d).abs() < 1e-12 && (hi - (c + h) / d).abs() < 1e-12);

    let single = compute_condition_stats(&[record("s", vec![with_outcome(base.clone(), Some(Outcome::Success { steps_used: 12 }))])]);
    assert_eq!(single.rows[0].avg_steps_ci, Some((12.0, 12.0)));
}

/// Batches of 10^4 Bernoulli(0.4) dogs with uniform step counts on 5..40:
/// the intervals cover the true rate and mean in most batches, and the table
/// does not depend on record order.
#[test]
fn bernoulli_rate_inside_its_interval() {
    let mut base = idle_dog(0, 9);
    base.steps.clear();
    let mut rng = seeded(10);
    let batches = 40;
    let (mut rate_hits, mut steps_hits) = (0, 0);
    for _ in 0..batches {
        let logs: Vec<SessionLog> = (0..10_000)
            .map(|_| {
                with_outcome(
                    base.clone(),
                    Some(if rng.random_bool(0.4) { Outcome::Success { steps_used: rng.random_range(5..40) } } else { Outcome::Timeout }),
                )
            })
            .collect();
        let recs: Vec<_> = logs.chunks(3).enumerate().map(|(i, c)| record(&format!("p{i:05}"), c.to_vec())).collect();
        let stats = compute_condition_stats(&recs);
        let row = &stats.rows[0];
        rate_hits += usize::from(row.success_ci.0 <= 0.4 && 0.4 <= row.success_ci.1);
        let (lo, hi) = row.avg_steps_ci.unwrap();
        steps_hits += usize::from(lo <= 22.0 && 22.0 <= hi);
        let mut shuffled = recs.clone();
        shuffled.reverse();
        assert_eq!(compute_condition_stats(&shuffled), stats);
    }
    assert!(rate_hits >= 34 && steps_hits >= 34, "{rate_hits}/{batches} {steps_hits}/{batches}");
}

#[test]
fn csv_has_the_table_columns() {
    let recs = generate_synthetic_logs(&dog_env(), SPEC, SyntheticTeacher::Optimal, 6, 11, &SynthConfig::default()).unwrap();
    let mut buf = Vec::new();
    compute_condition_stats(&recs).write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "Learner Type,Slider Sync,#Subjects,#Dogs,Success Rate (%),Success CI Low (%),Success CI High (%),Avg Steps when Successful,Avg Steps CI Low,Avg Steps CI High"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["Q0", "on", "2", "6"]);
}

#[test]
fn permutation_machinery() {
    common::check_permutation_machinery(12).unwrap();
}

#[test]
fn permutation_test_reports_every_simulation() {
    let recs = generate_synthetic_logs(&dog_env(), SPEC, SyntheticTeacher::Optimal, 3, 13, &SynthConfig::default()).unwrap();
    let r = permutation_test(&recs[0], 300, 14).unwrap();
    assert_eq!(r.participant_id, recs[0].participant_id);
    assert_eq!((r.seeds.len(), r.steps.len()), (300, 300));
    assert_eq!(r.n_target_reached, r.steps.iter().flatten().count());
    assert!(r.steps.iter().flatten().all(|&s| s <= 40));
    assert_ne!(permutation_test(&recs[0], 300, 15).unwrap().seeds, r.seeds);
}

#[test]
fn permutation_test_rejects_empty_input() {
    let empty = record("e", vec![]);
    assert!(matches!(permutation_test(&empty, 10, 0), Err(AnalysisError::EmptyFeedback(_))));
    let recs = generate_synthetic_logs(&dog_env(), SPEC, SyntheticTeacher::Optimal, 1, 0, &SynthConfig::default()).unwrap();
    assert!(matches!(permutation_test(&recs[0], 0, 0), Err(AnalysisError::Invalid(_))));
}

/// One-sided two-proportion test: random feedback succeeds less often than
/// optimal feedback.
#[test]
fn random_teacher_is_worse_than_optimal() {
    let env = dog_env();
    let cfg = SynthConfig::default();
    let rate = |t| compute_condition_stats(&generate_synthetic_logs(&env, SPEC, t, 300, 16, &cfg).unwrap()).rows[0].success_rate;
    let (p1, p2) = (rate(SyntheticTeacher::Optimal), rate(SyntheticTeacher::Random));
    let pooled = (p1 + p2) / 2.0;
    let z = (p1 - p2) / (pooled * (1.0 - pooled) * 2.0 / 300.0).sqrt();
    let p_value = 1.0 - Normal::standard().cdf(z);
    assert!(p_value < 0.01, "optimal {p1}, random {p2}, p {p_value}");
}

#[test]
fn records_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let recs =
        generate_synthetic_logs(&dog_env(), LearnerSpec::As2, SyntheticTeacher::Noisy { p_flip: 0.2 }, 7, 17, &SynthConfig::default())
            .unwrap();
    let logs: Vec<SessionLog> = recs.iter().flat_map(|r| r.logs.clone()).collect();
    write_log_file(&dir.path().join("a.ndjson"), &logs[..4]).unwrap();
    write_log_file(&dir.path().join("b.jsonl"), &logs[4..]).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(load_records(dir.path()).unwrap(), recs);
}

#[test]
fn unreached_quick_path_exists() {
    let env = dog_env();
    let goal = TeachingGoal::dog();
    assert!(teachlab::analysis::shortest_success_path(&env, &goal).unwrap() < optimal_length(&env, &goal, 0.1).unwrap());
}
