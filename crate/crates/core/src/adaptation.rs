//! Difficulty ladder and the per-session controller.
//!
//! A session is five trials. In the adaptive condition the first trial runs
//! at level 3 and each classification moves the next trial one level down
//! (High workload) or up (Low), clamped to the ladder. The fixed-order
//! condition always runs levels 1 to 5; its labels are recorded but ignored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::RatingPair;
use crate::classifier::WorkloadLabel;
use crate::flightperf::PerformanceScore;

pub const TRIALS_PER_SESSION: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptationError {
    #[error("difficulty level {0} outside 1..=5")]
    InvalidLevel(i64),
    #[error("protocol violation: {event} not allowed in phase {phase}")]
    ProtocolViolation { phase: Phase, event: &'static str },
    #[error("label stream ended after {0} trials")]
    IncompleteSession(usize),
    #[error("replay mismatch at trial {trial}: expected level {expected}, logged {logged}")]
    ReplayMismatch { trial: usize, expected: DifficultyLevel, logged: DifficultyLevel },
    #[error("trial {0} has no classification")]
    MissingLabel(usize),
    #[error("parse: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DifficultyLevel(u8);

impl DifficultyLevel {
    pub const MIN: DifficultyLevel = DifficultyLevel(1);
    pub const MEDIUM: DifficultyLevel = DifficultyLevel(3);
    pub const MAX: DifficultyLevel = DifficultyLevel(5);

    pub fn new(level: i64) -> Result<Self, AdaptationError> {
        if (1..=5).contains(&level) {
            Ok(Self(level as u8))
        } else {
            Err(AdaptationError::InvalidLevel(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> [DifficultyLevel; 5] {
        [1, 2, 3, 4, 5].map(DifficultyLevel)
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "clear weather and outside visuals",
            2 => "misty outside visuals",
            3 => "heavy fog, no outside visuals",
            4 => "misty outside visuals, attitude indicator failed",
            _ => "heavy fog with false horizon",
        }
    }
}

impl TryFrom<u8> for DifficultyLevel {
    type Error = AdaptationError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v as i64)
    }
}

impl From<DifficultyLevel> for u8 {
    fn from(l: DifficultyLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    FixedOrder,
    Adaptive,
}

impl Condition {
    pub fn first_level(self) -> DifficultyLevel {
        match self {
            Condition::FixedOrder => DifficultyLevel::MIN,
            Condition::Adaptive => DifficultyLevel::MEDIUM,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::FixedOrder => "fixed",
            Condition::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = AdaptationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" | "fixed_order" | "fixed-order" | "fixedorder" => Ok(Condition::FixedOrder),
            "adaptive" => Ok(Condition::Adaptive),
            other => Err(AdaptationError::Parse(format!("unknown condition {other:?}"))),
        }
    }
}

/// Flight task flown in every trial of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// 180 to 110 kts, straight and level.
    Deceleration,
    /// Full 360° left turn at 30° roll, holding altitude.
    MediumTurn,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Deceleration => "decel",
            TaskKind::MediumTurn => "turn",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = AdaptationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "decel" | "deceleration" => Ok(TaskKind::Deceleration),
            "turn" | "medium_turn" | "medium-turn" | "mediumturn" => Ok(TaskKind::MediumTurn),
            other => Err(AdaptationError::Parse(format!("unknown task {other:?}"))),
        }
    }
}

/// High workload steps down, Low steps up; the ends of the ladder repeat.
pub fn next_difficulty(current: DifficultyLevel, label: WorkloadLabel) -> DifficultyLevel {
    match label {
        WorkloadLabel::High => DifficultyLevel(current.0.saturating_sub(1).max(1)),
        WorkloadLabel::Low => DifficultyLevel((current.0 + 1).min(5)),
    }
}

pub fn schedule_fixed() -> [DifficultyLevel; TRIALS_PER_SESSION] {
    DifficultyLevel::all()
}

/// Level for trial `completed + 1` under the condition's rule, given the
/// trial just finished.
fn rule_next(condition: Condition, completed: usize, current: DifficultyLevel, label: WorkloadLabel) -> DifficultyLevel {
    match condition {
        Condition::Adaptive => next_difficulty(current, label),
        Condition::FixedOrder => schedule_fixed()[completed.min(TRIALS_PER_SESSION - 1)],
    }
}

/// Replays a whole session from a label stream.
pub fn run_condition(
    condition: Condition,
    labels: impl IntoIterator<Item = WorkloadLabel>,
) -> Result<Vec<(DifficultyLevel, WorkloadLabel)>, AdaptationError> {
    let mut labels = labels.into_iter();
    let mut level = condition.first_level();
    let mut out = Vec::with_capacity(TRIALS_PER_SESSION);
    for trial in 1..=TRIALS_PER_SESSION {
        let label = labels.next().ok_or(AdaptationError::IncompleteSession(trial - 1))?;
        out.push((level, label));
        level = rule_next(condition, trial, level, label);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    TrialRunning,
    Classifying,
    AwaitingNext,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Idle, Phase::TrialRunning, Phase::Classifying, Phase::AwaitingNext, Phase::Done];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Idle => "idle",
            Phase::TrialRunning => "trial_running",
            Phase::Classifying => "classifying",
            Phase::AwaitingNext => "awaiting_next",
            Phase::Done => "done",
        };
        f.write_str(s)
    }
}

/// Where a trial's difficulty came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultySource {
    Rule,
    Override,
}

/// Operator decision replacing the controller's proposal for the next trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub level: DifficultyLevel,
    pub reason: String,
}

/// Virtual (session clock) and wall-clock time of a lifecycle step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub virtual_s: f64,
    pub wall_unix_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTimestamps {
    pub started: Option<Stamp>,
    pub captured: Option<Stamp>,
    pub classified: Option<Stamp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub difficulty: DifficultyLevel,
    pub source: DifficultySource,
    pub label: Option<WorkloadLabel>,
    pub ratings: Option<RatingPair>,
    pub performance: Option<PerformanceScore>,
    /// Set when the operator forced the level of the following trial.
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub override_next: Option<OverrideRecord>,
    #[serde(default)]
    pub timestamps: TrialTimestamps,
}

impl TrialRecord {
    fn new(index: usize, difficulty: DifficultyLevel, source: DifficultySource) -> Self {
        Self {
            index,
            difficulty,
            source,
            label: None,
            ratings: None,
            performance: None,
            override_next: None,
            timestamps: TrialTimestamps::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    TrialStarted,
    EpochCaptured,
    Labeled { label: WorkloadLabel },
    OperatorOverride { level: DifficultyLevel, reason: String },
    TrialAborted,
}

impl SessionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SessionEvent::TrialStarted => "trial_started",
            SessionEvent::EpochCaptured => "epoch_captured",
            SessionEvent::Labeled { .. } => "labeled",
            SessionEvent::OperatorOverride { .. } => "operator_override",
            SessionEvent::TrialAborted => "trial_aborted",
        }
    }
}

/// Single-writer session controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub condition: Condition,
    pub task: TaskKind,
    pub trials: Vec<TrialRecord>,
    /// Level and provenance the next started trial will use.
    pub next_level: DifficultyLevel,
    pub next_source: DifficultySource,
    /// Trials discarded by an abort.
    #[serde(default)]
    pub aborted: usize,
}

impl SessionState {
    pub fn new(condition: Condition, task: TaskKind) -> Self {
        Self {
            phase: Phase::Idle,
            condition,
            task,
            trials: Vec::new(),
            next_level: condition.first_level(),
            next_source: DifficultySource::Rule,
            aborted: 0,
        }
    }

    pub fn current_trial(&self) -> Option<&TrialRecord> {
        self.trials.last()
    }

    pub fn current_trial_mut(&mut self) -> Option<&mut TrialRecord> {
        self.trials.last_mut()
    }

    pub fn completed_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.label.is_some()).count()
    }

    /// Whether `event` is legal in the current phase.
    pub fn accepts(&self, event: &SessionEvent) -> bool {
        matches!(
            (self.phase, event),
            (Phase::Idle | Phase::AwaitingNext, SessionEvent::TrialStarted)
                | (Phase::TrialRunning, SessionEvent::EpochCaptured)
                | (Phase::Classifying, SessionEvent::Labeled { .. })
                | (Phase::AwaitingNext, SessionEvent::OperatorOverride { .. })
                | (Phase::TrialRunning | Phase::Classifying, SessionEvent::TrialAborted)
        )
    }

    /// Pure transition; `self` is untouched.
    pub fn step(&self, event: SessionEvent) -> Result<SessionState, AdaptationError> {
        let mut next = self.clone();
        next.apply(event)?;
        Ok(next)
    }

    /// In-place transition. On error nothing changes.
    pub fn apply(&mut self, event: SessionEvent) -> Result<(), AdaptationError> {
        if !self.accepts(&event) {
            return Err(AdaptationError::ProtocolViolation { phase: self.phase, event: event.name() });
        }
        match event {
            SessionEvent::TrialStarted => {
                let index = self.trials.len() + 1;
                self.trials.push(TrialRecord::new(index, self.next_level, self.next_source));
                self.phase = Phase::TrialRunning;
            }
            SessionEvent::EpochCaptured => self.phase = Phase::Classifying,
            SessionEvent::Labeled { label } => {
                let condition = self.condition;
                let trial = self.trials.last_mut().expect("classifying implies a running trial");
                trial.label = Some(label);
                let completed = trial.index;
                self.next_level = rule_next(condition, completed, trial.difficulty, label);
                self.next_source = DifficultySource::Rule;
                self.phase = if completed >= TRIALS_PER_SESSION { Phase::Done } else { Phase::AwaitingNext };
            }
            SessionEvent::OperatorOverride { level, reason } => {
                let trial = self.trials.last_mut().expect("awaiting next implies a finished trial");
                trial.override_next = Some(OverrideRecord { level, reason });
                self.next_level = level;
                self.next_source = DifficultySource::Override;
            }
            SessionEvent::TrialAborted => {
                self.trials.pop();
                self.aborted += 1;
                self.phase = if self.trials.is_empty() { Phase::Idle } else { Phase::AwaitingNext };
            }
        }
        Ok(())
    }

    /// Attaches self-ratings to the most recently finished trial.
    pub fn submit_ratings(&mut self, ratings: RatingPair) -> Result<(), AdaptationError> {
        if !matches!(self.phase, Phase::AwaitingNext | Phase::Done) {
            return Err(AdaptationError::ProtocolViolation { phase: self.phase, event: "submit_ratings" });
        }
        let trial = self.trials.last_mut().expect("finished trial exists");
        trial.ratings = Some(ratings);
        Ok(())
    }
}

/// Checks that each logged difficulty follows from the previous trial's
/// label under the condition's rule, or from a recorded override.
pub fn verify_replay(condition: Condition, trials: &[TrialRecord]) -> Result<(), AdaptationError> {
    let mut expected = condition.first_level();
    for (i, t) in trials.iter().enumerate() {
        if t.difficulty != expected {
            return Err(AdaptationError::ReplayMismatch { trial: i + 1, expected, logged: t.difficulty });
        }
        let Some(label) = t.label else {
            if i + 1 == trials.len() {
                return Ok(());
            }
            return Err(AdaptationError::MissingLabel(i + 1));
        };
        expected = match &t.override_next {
            Some(o) => o.level,
            None => rule_next(condition, i + 1, t.difficulty, label),
        };
    }
    Ok(())
}
