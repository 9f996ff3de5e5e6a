//! Newline-delimited JSON session logs.
//!
//! A file holds one or more episodes. Each episode is a `header` line, zero
//! or more `step` lines and, once finished, an `outcome` line:
//!
//! ```text
//! {"record":"header","learner_spec":{...},"episode_config":{...},...}
//! {"record":"step","step_index":0,"s":3,"a":1,...}
//! {"record":"outcome","outcome":"success","steps_used":9}
//! ```
//!
//! Lines are only ever appended, so a live session's file is always a valid
//! log prefix.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LogError;
use crate::teaching::{LogHeader, Outcome, SessionLog, StepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Step(StepRecord),
    Outcome(OutcomeLine),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeLine {
    #[serde(flatten)]
    pub outcome: Outcome,
}

pub fn log_lines(log: &SessionLog) -> Vec<LogLine> {
    let mut lines = Vec::with_capacity(log.steps.len() + 2);
    lines.push(LogLine::Header(log.header.clone()));
    lines.extend(log.steps.iter().cloned().map(LogLine::Step));
    if let Some(outcome) = log.outcome {
        lines.push(LogLine::Outcome(OutcomeLine { outcome }));
    }
    lines
}

pub fn write_logs<W: Write>(mut w: W, logs: &[SessionLog]) -> Result<(), LogError> {
    for log in logs {
        for line in log_lines(log) {
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_log_file(path: &Path, logs: &[SessionLog]) -> Result<(), LogError> {
    write_logs(BufWriter::new(File::create(path)?), logs)
}

pub fn read_logs<R: BufRead>(r: R) -> Result<Vec<SessionLog>, LogError> {
    let mut logs: Vec<SessionLog> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| LogError::Malformed { line: lineno, reason: e.to_string() })?;
        let malformed = |reason: &str| LogError::Malformed { line: lineno, reason: reason.to_string() };
        match parsed {
            LogLine::Header(header) => {
                logs.push(SessionLog { header, steps: Vec::new(), outcome: None });
            }
            LogLine::Step(step) => {
                let log = logs.last_mut().ok_or_else(|| malformed("step before any header"))?;
                if log.outcome.is_some() {
                    return Err(malformed("step after outcome"));
                }
                log.steps.push(step);
            }
            LogLine::Outcome(o) => {
                let log = logs.last_mut().ok_or_else(|| malformed("outcome before any header"))?;
                if log.outcome.replace(o.outcome).is_some() {
                    return Err(malformed("duplicate outcome"));
                }
            }
        }
    }
    Ok(logs)
}

pub fn read_log_file(path: &Path) -> Result<Vec<SessionLog>, LogError> {
    read_logs(BufReader::new(File::open(path)?))
}

/// Append-only writer; every line is flushed before returning.
#[derive(Debug)]
pub struct LogAppender {
    file: File,
}

impl LogAppender {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append(&mut self, line: &LogLine) -> Result<(), LogError> {
        let mut buf = serde_json::to_vec(line).map_err(std::io::Error::from)?;
        buf.push(b'\n');
        // one write per line so a crash never leaves half a record behind a full one
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}
