//! Participants and their dogs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::learner::LearnerSpec;
use crate::log::read_log_file;
use crate::session::LearnerCondition;
use crate::teaching::SessionLog;

/// Between-subjects condition: learner type and whether the scanner followed
/// the slider live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub learner: LearnerSpec,
    pub sync: bool,
}

impl Condition {
    /// Short learner tag: `Q0`, `Q45`, `AS1` for the experiment's conditions,
    /// the spec string otherwise.
    pub fn learner_tag(&self) -> String {
        LearnerCondition::from_spec(self.learner).map_or_else(|| self.learner.to_string(), |c| c.to_string())
    }
}

/// One participant: up to three dogs taught under a single condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub condition: Condition,
    pub logs: Vec<SessionLog>,
}

impl ParticipantRecord {
    pub fn new(participant_id: impl Into<String>, condition: Condition, logs: Vec<SessionLog>) -> Result<Self, AnalysisError> {
        let rec = Self { participant_id: participant_id.into(), condition, logs };
        rec.check()?;
        Ok(rec)
    }

    /// Every log must be taught under the participant's condition.
    pub fn check(&self) -> Result<(), AnalysisError> {
        for (i, log) in self.logs.iter().enumerate() {
            if log.header.learner_spec != self.condition.learner {
                return Err(AnalysisError::Invalid(format!(
                    "participant {}: dog {i} uses learner {} but the condition is {}",
                    self.participant_id, log.header.learner_spec, self.condition.learner
                )));
            }
            if log.header.tags.sync.is_some_and(|s| s != self.condition.sync) {
                return Err(AnalysisError::Invalid(format!("participant {}: dog {i} has a different sync flag", self.participant_id)));
            }
        }
        Ok(())
    }
}

/// Group logs into participants by their `participant_id` tag.
///
/// Logs without a participant id each become their own participant named
/// `anon-N`. A missing sync tag counts as `false`.
pub fn group_logs(logs: Vec<SessionLog>) -> Result<Vec<ParticipantRecord>, AnalysisError> {
    let mut by_id: BTreeMap<String, Vec<SessionLog>> = BTreeMap::new();
    for (i, log) in logs.into_iter().enumerate() {
        let id = log.header.tags.participant_id.clone().unwrap_or_else(|| format!("anon-{i}"));
        by_id.entry(id).or_default().push(log);
    }
    by_id
        .into_iter()
        .map(|(id, mut logs)| {
            logs.sort_by_key(|l| l.header.tags.dog_index.unwrap_or(usize::MAX));
            let condition = Condition { learner: logs[0].header.learner_spec, sync: logs[0].header.tags.sync.unwrap_or(false) };
            ParticipantRecord::new(id, condition, logs)
        })
        .collect()
}

/// Read every `*.ndjson` / `*.jsonl` file under `dir` (not recursive) and
/// group the episodes into participants.
pub fn load_records(dir: &Path) -> Result<Vec<ParticipantRecord>, AnalysisError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ndjson" || x == "jsonl"))
        .collect();
    paths.sort();
    let mut logs = Vec::new();
    for p in paths {
        logs.extend(read_log_file(&p)?);
    }
    group_logs(logs)
}

/// Flatten records back to logs, in participant then dog order.
pub fn all_logs(records: &[ParticipantRecord]) -> impl Iterator<Item = &SessionLog> {
    records.iter().flat_map(|r| r.logs.iter())
}
