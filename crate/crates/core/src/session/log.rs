//! Session logs: one JSON record per line, header first.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{verify_replay, AdaptationError, Condition, TaskKind, TrialRecord};

pub const LOG_FORMAT: &str = "neuroflight-session";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("replayability violation: {0}")]
    Replay(AdaptationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub subject: u64,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub subject: String,
    pub condition: Condition,
    pub task: TaskKind,
    pub seeds: SessionSeeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archetype: Option<String>,
    pub software_version: String,
    pub created_unix_ms: u64,
    /// Virtual seconds per wall second; 0 means unthrottled.
    pub time_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub trials: Vec<TrialRecord>,
    pub aborted: usize,
    pub failed: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header { format: String, version: u32, header: SessionHeader },
    Trial { trial: TrialRecord },
    Summary { aborted: usize, failed: usize },
}

impl SessionLog {
    pub fn new(header: SessionHeader) -> Self {
        Self { header, trials: Vec::new(), aborted: 0, failed: 0 }
    }

    pub fn labels(&self) -> Vec<crate::classifier::WorkloadLabel> {
        self.trials.iter().filter_map(|t| t.label).collect()
    }

    /// Each logged difficulty must follow from the previous trial's label
    /// under the condition's rule, unless an override record explains it.
    pub fn check_replay(&self) -> Result<(), LogError> {
        verify_replay(self.header.condition, &self.trials).map_err(LogError::Replay)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        let mut line = |r: &Record| -> Result<(), LogError> {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&Record::Header { format: LOG_FORMAT.into(), version: LOG_VERSION, header: self.header.clone() })?;
        for t in &self.trials {
            line(&Record::Trial { trial: t.clone() })?;
        }
        line(&Record::Summary { aborted: self.aborted, failed: self.failed })
    }

    /// Parses without the replayability check.
    pub fn read_unchecked<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut log: Option<SessionLog> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let ln = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| LogError::Record { line: ln, message };
            let rec: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            match (rec, log.as_mut()) {
                (Record::Header { format, version, header }, None) => {
                    if format != LOG_FORMAT {
                        return Err(bad(format!("unknown format {format:?}")));
                    }
                    if version != LOG_VERSION {
                        return Err(bad(format!("log version {version}, expected {LOG_VERSION}")));
                    }
                    log = Some(SessionLog::new(header));
                }
                (Record::Header { .. }, Some(_)) => return Err(bad("second header record".into())),
                (_, None) => return Err(bad("first record must be the header".into())),
                (Record::Trial { trial }, Some(l)) => {
                    let expected = l.trials.len() + 1;
                    if trial.index != expected {
                        return Err(bad(format!("trial record {} out of order, expected {expected}", trial.index)));
                    }
                    l.trials.push(trial);
                }
                (Record::Summary { aborted, failed }, Some(l)) => {
                    l.aborted = aborted;
                    l.failed = failed;
                }
            }
        }
        log.ok_or(LogError::Record { line: 0, message: "empty log".into() })
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, LogError> {
        let log = Self::read_unchecked(r)?;
        log.check_replay()?;
        Ok(log)
    }
}

/// Writes atomically by renaming a sibling temporary file.
pub fn persist_session(log: &SessionLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
        log.write_to(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_session(path: impl AsRef<Path>) -> Result<SessionLog, LogError> {
    SessionLog::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
}
