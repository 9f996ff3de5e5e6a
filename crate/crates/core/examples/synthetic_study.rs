//! A synthetic version of the human study: generate participants for every
//! learner condition with a noisy optimal teacher, apply the exclusion rules
//! and print the condition table.
//!
//! ```text
//! cargo run --release -p teachlab --example synthetic_study
//! ```

use teachlab::analysis::{
    compute_condition_stats, exclusion_filter, generate_synthetic_logs, optimal_length, ExclusionReason, SynthConfig, SyntheticTeacher,
    DO_NOTHING_THRESHOLD,
};
use teachlab::session::LearnerCondition;
use teachlab::{dog_env, TeachingGoal};

fn main() {
    let env = dog_env();
    let mut records = Vec::new();
    for (i, condition) in LearnerCondition::ALL.into_iter().enumerate() {
        for sync in [false, true] {
            let cfg = SynthConfig { sync, ..Default::default() };
            let seed = 100 + 2 * i as u64 + u64::from(sync);
            records
                .extend(generate_synthetic_logs(&env, condition.spec(), SyntheticTeacher::Noisy { p_flip: 0.15 }, 60, seed, &cfg).unwrap());
        }
    }

    let len = optimal_length(&env, &TeachingGoal::dog(), 0.1).unwrap();
    let report = exclusion_filter(&records, len, DO_NOTHING_THRESHOLD);
    println!(
        "exclusions: {} faster than {len} steps, {} incomplete, {} do-nothing, {} replay errors",
        report.count(ExclusionReason::FasterThanOptimal),
        report.count(ExclusionReason::Incomplete),
        report.count(ExclusionReason::DoNothingOveruse),
        report.count(ExclusionReason::ExperimentError)
    );

    println!("\nall dogs:");
    print!("{}", compute_condition_stats(&records).to_table());
    println!("\nafter exclusions:");
    print!("{}", compute_condition_stats(&report.kept).to_table());
}
