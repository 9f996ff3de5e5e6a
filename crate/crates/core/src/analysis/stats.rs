//! Per-condition success rates and step counts with 95% intervals.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::AnalysisError;

use super::records::ParticipantRecord;

/// Two-sided interval `(lo, hi)`.
pub type Interval = (f64, f64);

fn z95() -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.975)
}

/// Wilson score interval for `k` successes out of `n` at 95%.
pub fn wilson_interval(k: usize, n: usize) -> Interval {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = z95();
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Student-t interval for the mean at 95%. A single observation gives a
/// point interval.
pub fn t_interval(xs: &[f64]) -> Option<(f64, Interval)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, (mean, mean)));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    let half = t * (var / n as f64).sqrt();
    Some((mean, (mean - half, mean + half)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub learner_type: String,
    pub sync: bool,
    pub n_subjects: usize,
    pub n_dogs: usize,
    pub n_success: usize,
    /// Fraction in `[0, 1]`.
    pub success_rate: f64,
    pub success_ci: Interval,
    /// `None` when no dog succeeded.
    pub avg_steps: Option<f64>,
    pub avg_steps_ci: Option<Interval>,
}

/// One row per condition that has at least one dog, sorted by learner tag
/// and then sync flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub rows: Vec<ConditionRow>,
}

impl ConditionStats {
    pub fn get(&self, learner_type: &str, sync: bool) -> Option<&ConditionRow> {
        self.rows.iter().find(|r| r.learner_type == learner_type && r.sync == sync)
    }

    /// Write the table as CSV with percentages for rates.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "Learner Type",
            "Slider Sync",
            "#Subjects",
            "#Dogs",
            "Success Rate (%)",
            "Success CI Low (%)",
            "Success CI High (%)",
            "Avg Steps when Successful",
            "Avg Steps CI Low",
            "Avg Steps CI High",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.2}"));
        for r in &self.rows {
            out.write_record([
                r.learner_type.clone(),
                if r.sync { "on".into() } else { "off".into() },
                r.n_subjects.to_string(),
                r.n_dogs.to_string(),
                format!("{:.1}", 100.0 * r.success_rate),
                format!("{:.1}", 100.0 * r.success_ci.0),
                format!("{:.1}", 100.0 * r.success_ci.1),
                opt(r.avg_steps),
                opt(r.avg_steps_ci.map(|c| c.0)),
                opt(r.avg_steps_ci.map(|c| c.1)),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plain-text rendering for terminals.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<14} {:<5} {:>9} {:>6}  {:<24} {}\n",
            "learner", "sync", "subjects", "dogs", "success rate (95% CI)", "avg steps when successful (95% CI)"
        );
        for r in &self.rows {
            let steps = match (r.avg_steps, r.avg_steps_ci) {
                (Some(m), Some((lo, hi))) => format!("{m:.2} ({lo:.2}, {hi:.2})"),
                _ => "-".into(),
            };
            s.push_str(&format!(
                "{:<14} {:<5} {:>9} {:>6}  {:<24} {}\n",
                r.learner_type,
                if r.sync { "on" } else { "off" },
                r.n_subjects,
                r.n_dogs,
                format!("{:.1}% ({:.1}, {:.1})", 100.0 * r.success_rate, 100.0 * r.success_ci.0, 100.0 * r.success_ci.1),
                steps
            ));
        }
        s
    }
}

/// Success rate over all dogs and mean steps over successful dogs, grouped
/// by (learner type, sync). Incomplete logs count as failures; filter them
/// out first with the exclusion rules if that is not wanted.
pub fn compute_condition_stats(records: &[ParticipantRecord]) -> ConditionStats {
    #[derive(Default)]
    struct Acc {
        subjects: usize,
        dogs: usize,
        wins: Vec<f64>,
    }
    let mut groups: BTreeMap<(String, bool), Acc> = BTreeMap::new();
    for rec in records {
        if rec.logs.is_empty() {
            continue;
        }
        let acc = groups.entry((rec.condition.learner_tag(), rec.condition.sync)).or_default();
        acc.subjects += 1;
        for log in &rec.logs {
            acc.dogs += 1;
            if let Some(steps) = log.outcome.and_then(|o| o.steps_used()) {
                acc.wins.push(steps as f64);
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|((learner_type, sync), mut acc)| {
            // sum in a fixed order so record order cannot change the last bits
            acc.wins.sort_by(f64::total_cmp);
            let n_success = acc.wins.len();
            let t = t_interval(&acc.wins);
            ConditionRow {
                learner_type,
                sync,
                n_subjects: acc.subjects,
                n_dogs: acc.dogs,
                n_success,
                success_rate: n_success as f64 / acc.dogs as f64,
                success_ci: wilson_interval(n_success, acc.dogs),
                avg_steps: t.map(|t| t.0),
                avg_steps_ci: t.map(|t| t.1),
            }
        })
        .collect();
    ConditionStats { rows }
}
