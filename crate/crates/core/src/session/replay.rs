//! Golden replay of per-trial (difficulty, output) tables.
//!
//! Input is comma-separated with the header
//! `subject,condition,trial,difficulty,output`; output is `L` or `H`.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;

use crate::adaptation::{run_condition, Condition, DifficultyLevel, TRIALS_PER_SESSION};
use crate::analysis::AnalysisError;
use crate::classifier::WorkloadLabel;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayRow {
    pub subject: String,
    pub condition: Condition,
    pub trial: usize,
    pub difficulty: DifficultyLevel,
    pub output: WorkloadLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayOutcome {
    pub subject: String,
    pub condition: Condition,
    pub logged: Vec<u8>,
    pub replayed: Vec<u8>,
    pub matches: bool,
}

fn parse_label(s: &str) -> Option<WorkloadLabel> {
    match s.trim() {
        "L" | "l" => Some(WorkloadLabel::Low),
        "H" | "h" => Some(WorkloadLabel::High),
        other => other.parse().ok(),
    }
}

pub fn read_replay_table<R: BufRead>(r: R) -> Result<Vec<ReplayRow>, AnalysisError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.starts_with("subject,") {
            continue;
        }
        let bad = |m: String| AnalysisError::Parse { line: ln, message: m };
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let condition: Condition = f[1].parse().map_err(|e: crate::adaptation::AdaptationError| bad(e.to_string()))?;
        let trial: usize = f[2].parse().map_err(|_| bad(format!("bad trial {:?}", f[2])))?;
        let level: i64 = f[3].parse().map_err(|_| bad(format!("bad difficulty {:?}", f[3])))?;
        let difficulty = DifficultyLevel::new(level).map_err(|e| bad(e.to_string()))?;
        let output = parse_label(f[4]).ok_or_else(|| bad(format!("bad output {:?}", f[4])))?;
        rows.push(ReplayRow { subject: f[0].to_string(), condition, trial, difficulty, output });
    }
    Ok(rows)
}

/// Re-runs the controller over each session's outputs and compares the
/// difficulties it produces with the logged ones.
pub fn replay_table(rows: &[ReplayRow]) -> Result<Vec<ReplayOutcome>, AnalysisError> {
    let mut sessions: BTreeMap<(String, &'static str), Vec<&ReplayRow>> = BTreeMap::new();
    for r in rows {
        sessions.entry((r.subject.clone(), r.condition.as_str())).or_default().push(r);
    }
    let mut out = Vec::with_capacity(sessions.len());
    for ((subject, _), mut trials) in sessions {
        trials.sort_by_key(|r| r.trial);
        let idx: Vec<usize> = trials.iter().map(|r| r.trial).collect();
        if idx != (1..=TRIALS_PER_SESSION).collect::<Vec<_>>() {
            return Err(AnalysisError::Validation(format!("subject {subject}: trials {idx:?}, expected 1..=5")));
        }
        let condition = trials[0].condition;
        let replayed = run_condition(condition, trials.iter().map(|r| r.output))
            .map_err(|e| AnalysisError::Validation(e.to_string()))?;
        let logged: Vec<u8> = trials.iter().map(|r| r.difficulty.get()).collect();
        let replayed: Vec<u8> = replayed.iter().map(|(d, _)| d.get()).collect();
        out.push(ReplayOutcome { subject, condition, matches: logged == replayed, logged, replayed });
    }
    out.sort_by(|a, b| {
        (a.condition.as_str(), natural_key(&a.subject)).cmp(&(b.condition.as_str(), natural_key(&b.subject)))
    });
    Ok(out)
}

fn natural_key(s: &str) -> (u64, String) {
    (s.parse().unwrap_or(u64::MAX), s.to_string())
}
