//! The session actor. One task owns the `SessionState`; operator commands,
//! capture completions and peer replies all arrive on its queue and are
//! applied in order. Every change is broadcast to subscribers.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncWriteExt, BufReader};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;

use super::log::{persist_session, SessionHeader, SessionLog, SessionSeeds};
use super::peer::ClassifierPeer;
use super::protocol::{encode_message, EpochPayload, ErrorCode, FrameReader, WireBody, WireMessage};
use crate::adaptation::{
    AdaptationError, Condition, DifficultyLevel, DifficultySource, Phase, SessionEvent, SessionState, Stamp, TaskKind,
    TrialRecord,
};
use crate::analysis::RatingPair;
use crate::classifier::{StackingModel, WorkloadLabel};
use crate::flightperf::{score_performance, PerformanceScore};
use crate::pipeline::{train_synthetic_model, PipelineConfig};
use crate::signal::{EegEpoch, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE};
use crate::synth::{gen_eeg_epoch, gen_flight_telemetry, make_subject_profile, mix_seed, Archetype, SubjectProfile};

const LOOPBACK_BUFFER: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Session logs are written here when set.
    pub data_dir: Option<PathBuf>,
    /// Default virtual seconds per wall second; 0 runs unthrottled.
    pub time_scale: f64,
    pub trial_duration: f64,
    pub sample_rate: f64,
    pub classification_timeout: Duration,
    pub pipeline: PipelineConfig,
    /// Model used for every session; otherwise one is trained per subject.
    pub model: Option<Arc<StackingModel>>,
    pub training_epochs_per_class: usize,
    /// Address of an external classifier peer; loopback when unset.
    pub wire_addr: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            time_scale: 0.0,
            trial_duration: DEFAULT_DURATION,
            sample_rate: DEFAULT_SAMPLE_RATE,
            classification_timeout: Duration::from_secs(60),
            pipeline: PipelineConfig::standard(),
            model: None,
            training_epochs_per_class: 12,
            wire_addr: None,
        }
    }
}

fn default_subject() -> String {
    "synthetic".into()
}

fn default_archetype() -> Archetype {
    Archetype::Threshold(DifficultyLevel::MEDIUM)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    #[serde(default = "default_subject")]
    pub subject: String,
    pub condition: Condition,
    pub task: TaskKind,
    #[serde(default = "default_archetype")]
    pub archetype: Archetype,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    /// Directory of `trial<N>.nfe` epoch files to stream by reference
    /// instead of synthesising epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum OperatorCommand {
    ConfigureSession(SessionSpec),
    StartTrial,
    AbortTrial,
    SubmitRatings { isa: u8, f_isa: u8 },
    OverrideDifficulty { level: i64, #[serde(default)] reason: String },
}

impl OperatorCommand {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorCommand::ConfigureSession(_) => "configure_session",
            OperatorCommand::StartTrial => "start_trial",
            OperatorCommand::AbortTrial => "abort_trial",
            OperatorCommand::SubmitRatings { .. } => "submit_ratings",
            OperatorCommand::OverrideDifficulty { .. } => "override_difficulty",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandError {
    /// Machine-readable reason.
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

impl CommandError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), phase: None }
    }

    fn violation(phase: Phase, command: &str) -> Self {
        Self {
            code: "protocol_violation".into(),
            message: format!("{command} not allowed in phase {phase}"),
            phase: Some(phase),
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CommandError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub subject: String,
    pub phase: Phase,
    pub condition: Condition,
    pub task: TaskKind,
    pub trials: Vec<TrialRecord>,
    pub next_trial: usize,
    pub next_level: DifficultyLevel,
    pub next_source: DifficultySource,
    pub aborted: usize,
    pub failed: usize,
    pub time_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Configured,
    TrialStarted,
    EpochCaptured,
    Classified,
    DifficultySet,
    TrialEnded,
    RatingsSubmitted,
    Overridden,
    TrialAborted,
    TrialFailed,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
    /// The wire frame this change produced or consumed, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire: Option<WireMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub snapshot: Snapshot,
}

enum Msg {
    Command(OperatorCommand, oneshot::Sender<Result<Snapshot, CommandError>>),
    Snapshot(oneshot::Sender<Option<Snapshot>>),
    Log(oneshot::Sender<Option<SessionLog>>),
    Captured { gen: u64, attempt: u32, result: Result<Captured, String> },
    Wire { gen: u64, msg: WireMessage },
    LinkClosed { gen: u64, reason: String },
    Timeout { gen: u64, attempt: u32 },
}

struct Captured {
    payload: EpochPayload,
    performance: Option<PerformanceScore>,
}

/// Cloneable handle to the running actor.
#[derive(Clone)]
pub struct SessionService {
    tx: mpsc::UnboundedSender<Msg>,
    events: broadcast::Sender<ServiceEvent>,
}

impl SessionService {
    pub fn spawn(config: ServiceConfig) -> Self {
        let (tx, rx) = mpsc::unbounded_channel();
        let (events, _) = broadcast::channel(1024);
        let actor = Actor { config, tx: tx.clone(), events: events.clone(), session: None, gen: 0, event_seq: 0 };
        tokio::spawn(actor.run(rx));
        Self { tx, events }
    }

    pub async fn command(&self, cmd: OperatorCommand) -> Result<Snapshot, CommandError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(Msg::Command(cmd, reply)).map_err(|_| CommandError::new("stopped", "service stopped"))?;
        rx.await.map_err(|_| CommandError::new("stopped", "service stopped"))?
    }

    pub async fn snapshot(&self) -> Option<Snapshot> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(Msg::Snapshot(reply)).ok()?;
        rx.await.ok().flatten()
    }

    pub async fn session_log(&self) -> Option<SessionLog> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(Msg::Log(reply)).ok()?;
        rx.await.ok().flatten()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServiceEvent> {
        self.events.subscribe()
    }

    /// Configures a session and drives all five trials, submitting no
    /// ratings. Returns the final log.
    pub async fn run_to_completion(&self, spec: SessionSpec) -> Result<SessionLog, CommandError> {
        let mut events = self.subscribe();
        self.command(OperatorCommand::ConfigureSession(spec)).await?;
        loop {
            let snap = self.command(OperatorCommand::StartTrial).await?;
            let trial = snap.trials.len();
            loop {
                let ev = match events.recv().await {
                    Ok(ev) => ev,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(_) => return Err(CommandError::new("stopped", "event stream closed")),
                };
                if ev.snapshot.phase == Phase::Done {
                    return self.session_log().await.ok_or_else(|| CommandError::new("stopped", "no log"));
                }
                match ev.kind {
                    EventKind::TrialEnded if ev.trial == Some(trial) => break,
                    EventKind::TrialFailed => break,
                    _ => {}
                }
            }
        }
    }
}

struct Link {
    out: mpsc::UnboundedSender<Vec<u8>>,
    next_seq: u64,
    tasks: Vec<JoinHandle<()>>,
}

impl Link {
    fn send(&mut self, body: WireBody) -> WireMessage {
        let msg = WireMessage::new(self.next_seq, body);
        self.next_seq += 1;
        let _ = self.out.send(encode_message(&msg));
        msg
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

struct Active {
    gen: u64,
    id: String,
    spec: SessionSpec,
    profile: SubjectProfile,
    state: SessionState,
    header: SessionHeader,
    failed: usize,
    attempt: u32,
    time_scale: f64,
    virtual_s: f64,
    capture: Option<JoinHandle<()>>,
    link: Link,
    log_path: Option<PathBuf>,
}

impl Active {
    fn stamp(&self) -> Stamp {
        Stamp { virtual_s: self.virtual_s, wall_unix_ms: now_ms() }
    }

    fn log(&self) -> SessionLog {
        SessionLog {
            header: self.header.clone(),
            trials: self.state.trials.clone(),
            aborted: self.state.aborted,
            failed: self.failed,
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            session_id: self.id.clone(),
            subject: self.spec.subject.clone(),
            phase: self.state.phase,
            condition: self.state.condition,
            task: self.state.task,
            trials: self.state.trials.clone(),
            next_trial: self.state.completed_trials() + 1,
            next_level: self.state.next_level,
            next_source: self.state.next_source,
            aborted: self.state.aborted,
            failed: self.failed,
            time_scale: self.time_scale,
            log_path: self.log_path.as_ref().map(|p| p.display().to_string()),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

struct Actor {
    config: ServiceConfig,
    tx: mpsc::UnboundedSender<Msg>,
    events: broadcast::Sender<ServiceEvent>,
    session: Option<Active>,
    gen: u64,
    event_seq: u64,
}

impl Actor {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Msg>) {
        while let Some(msg) = rx.recv().await {
            match msg {
                Msg::Command(cmd, reply) => {
                    let r = self.handle_command(cmd).await;
                    let _ = reply.send(r);
                }
                Msg::Snapshot(reply) => {
                    let _ = reply.send(self.session.as_ref().map(Active::snapshot));
                }
                Msg::Log(reply) => {
                    let _ = reply.send(self.session.as_ref().map(Active::log));
                }
                Msg::Captured { gen, attempt, result } => self.on_captured(gen, attempt, result),
                Msg::Wire { gen, msg } => self.on_wire(gen, msg),
                Msg::LinkClosed { gen, reason } => self.on_link_closed(gen, reason),
                Msg::Timeout { gen, attempt } => self.on_timeout(gen, attempt),
            }
        }
    }

    fn publish(&mut self, kind: EventKind, trial: Option<usize>, wire: Option<WireMessage>, detail: Option<String>) {
        let Some(s) = &self.session else { return };
        self.event_seq += 1;
        let ev = ServiceEvent { seq: self.event_seq, kind, trial, wire, detail, snapshot: s.snapshot() };
        let _ = self.events.send(ev);
    }

    fn persist(&self) {
        if let Some(s) = &self.session {
            if let Some(path) = &s.log_path {
                if let Err(e) = persist_session(&s.log(), path) {
                    eprintln!("warning: could not persist session log {}: {e}", path.display());
                }
            }
        }
    }

    fn active(&mut self, command: &str) -> Result<&mut Active, CommandError> {
        self.session
            .as_mut()
            .ok_or_else(|| CommandError::new("no_session", format!("{command} needs a configured session")))
    }

    async fn handle_command(&mut self, cmd: OperatorCommand) -> Result<Snapshot, CommandError> {
        let name = cmd.name();
        match cmd {
            OperatorCommand::ConfigureSession(spec) => self.configure(spec).await,
            OperatorCommand::StartTrial => {
                let s = self.active(name)?;
                s.state.apply(SessionEvent::TrialStarted).map_err(|e| map_violation(e, name))?;
                s.attempt += 1;
                let stamp = s.stamp();
                let trial = s.state.current_trial_mut().expect("just started");
                trial.timestamps.started = Some(stamp);
                let (index, difficulty) = (trial.index, trial.difficulty);
                let wire = s.link.send(WireBody::StartTrial {
                    session: s.id.clone(),
                    trial: index,
                    condition: s.state.condition,
                    task: s.state.task,
                    difficulty,
                });
                self.spawn_capture();
                self.publish(EventKind::TrialStarted, Some(index), Some(wire), None);
                Ok(self.session.as_ref().unwrap().snapshot())
            }
            OperatorCommand::AbortTrial => {
                let s = self.active(name)?;
                let index = s.state.current_trial().map(|t| t.index);
                s.state.apply(SessionEvent::TrialAborted).map_err(|e| map_violation(e, name))?;
                if let Some(h) = s.capture.take() {
                    h.abort();
                }
                let wire = index.map(|trial| s.link.send(WireBody::TrialEnd { trial }));
                self.persist();
                self.publish(EventKind::TrialAborted, index, wire, None);
                Ok(self.session.as_ref().unwrap().snapshot())
            }
            OperatorCommand::SubmitRatings { isa, f_isa } => {
                let ratings = RatingPair::new(isa, f_isa).map_err(|e| CommandError::new("invalid_ratings", e.to_string()))?;
                let s = self.active(name)?;
                s.state.submit_ratings(ratings).map_err(|e| map_violation(e, name))?;
                let index = s.state.current_trial().map(|t| t.index);
                self.persist();
                self.publish(EventKind::RatingsSubmitted, index, None, None);
                Ok(self.session.as_ref().unwrap().snapshot())
            }
            OperatorCommand::OverrideDifficulty { level, reason } => {
                let level = DifficultyLevel::new(level).map_err(|e| CommandError::new("invalid_level", e.to_string()))?;
                let s = self.active(name)?;
                s.state
                    .apply(SessionEvent::OperatorOverride { level, reason: reason.clone() })
                    .map_err(|e| map_violation(e, name))?;
                let next_trial = s.state.completed_trials() + 1;
                let wire = s.link.send(WireBody::SetDifficulty { next_trial, level, source: DifficultySource::Override });
                self.persist();
                self.publish(EventKind::Overridden, Some(next_trial), Some(wire), Some(reason));
                Ok(self.session.as_ref().unwrap().snapshot())
            }
        }
    }

    async fn configure(&mut self, spec: SessionSpec) -> Result<Snapshot, CommandError> {
        if let Some(s) = &self.session {
            if matches!(s.state.phase, Phase::TrialRunning | Phase::Classifying) {
                return Err(CommandError::violation(s.state.phase, "configure_session"));
            }
        }
        let time_scale = spec.time_scale.unwrap_or(self.config.time_scale);
        if !(time_scale >= 0.0 && time_scale.is_finite()) {
            return Err(CommandError::new("config", format!("time scale {time_scale} must be finite and >= 0")));
        }
        let profile = make_subject_profile(spec.seed, spec.archetype);
        self.gen += 1;
        let gen = self.gen;
        let link = self.open_link(gen, &profile, spec.seed).await?;

        let created = now_ms();
        let id = format!("{}-{}-{created}-{gen}", sanitize(&spec.subject), spec.seed);
        let header = SessionHeader {
            session_id: id.clone(),
            subject: spec.subject.clone(),
            condition: spec.condition,
            task: spec.task,
            seeds: SessionSeeds { subject: spec.seed, trials: mix_seed(spec.seed, 0x7121A1) },
            archetype: Some(spec.archetype.to_string()),
            software_version: env!("CARGO_PKG_VERSION").into(),
            created_unix_ms: created,
            time_scale,
        };
        let log_path = self.config.data_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
        self.session = Some(Active {
            gen,
            id,
            state: SessionState::new(spec.condition, spec.task),
            spec,
            profile,
            header,
            failed: 0,
            attempt: 0,
            time_scale,
            virtual_s: 0.0,
            capture: None,
            link,
            log_path,
        });
        self.persist();
        self.publish(EventKind::Configured, None, None, None);
        Ok(self.session.as_ref().unwrap().snapshot())
    }

    async fn open_link(&self, gen: u64, profile: &SubjectProfile, seed: u64) -> Result<Link, CommandError> {
        let (host_read, host_write): (Box<dyn tokio::io::AsyncRead + Send + Unpin>, Box<dyn tokio::io::AsyncWrite + Send + Unpin>);
        let mut tasks = Vec::new();
        if let Some(addr) = &self.config.wire_addr {
            let stream = tokio::net::TcpStream::connect(addr)
                .await
                .map_err(|e| CommandError::new("peer_unavailable", format!("{addr}: {e}")))?;
            let (r, w) = stream.into_split();
            host_read = Box::new(r);
            host_write = Box::new(w);
        } else {
            let model = match &self.config.model {
                Some(m) => m.clone(),
                None => {
                    let profile = profile.clone();
                    let cfg = self.config.pipeline.clone();
                    let per_class = self.config.training_epochs_per_class;
                    let m = tokio::task::spawn_blocking(move || {
                        train_synthetic_model(&profile, per_class, mix_seed(seed, 0x7EA1), &cfg)
                    })
                    .await
                    .map_err(|e| CommandError::new("internal", e.to_string()))?
                    .map_err(|e| CommandError::new("training_failed", e.to_string()))?;
                    Arc::new(m)
                }
            };
            let peer = ClassifierPeer::new(model, self.config.pipeline.clone());
            let (host, remote) = tokio::io::duplex(LOOPBACK_BUFFER);
            let (pr, pw) = tokio::io::split(remote);
            tasks.push(tokio::spawn(async move {
                if let Err(e) = peer.serve(pr, pw).await {
                    eprintln!("warning: loopback classifier stopped: {e}");
                }
            }));
            let (hr, hw) = tokio::io::split(host);
            host_read = Box::new(hr);
            host_write = Box::new(hw);
        }

        let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Vec<u8>>();
        let tx = self.tx.clone();
        let mut writer = host_write;
        tasks.push(tokio::spawn(async move {
            while let Some(frame) = out_rx.recv().await {
                if let Err(e) = writer.write_all(&frame).await {
                    let _ = tx.send(Msg::LinkClosed { gen, reason: e.to_string() });
                    return;
                }
                let _ = writer.flush().await;
            }
        }));
        let tx = self.tx.clone();
        tasks.push(tokio::spawn(async move {
            let mut frames = FrameReader::new(BufReader::new(host_read));
            loop {
                match frames.next().await {
                    Ok(Some(msg)) => {
                        if tx.send(Msg::Wire { gen, msg }).is_err() {
                            return;
                        }
                    }
                    Ok(None) => {
                        let _ = tx.send(Msg::LinkClosed { gen, reason: "peer closed the connection".into() });
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send(Msg::LinkClosed { gen, reason: e.to_string() });
                        return;
                    }
                }
            }
        }));
        Ok(Link { out: out_tx, next_seq: 1, tasks })
    }

    fn spawn_capture(&mut self) {
        let s = self.session.as_mut().expect("active session");
        let gen = s.gen;
        let attempt = s.attempt;
        let trial = s.state.current_trial().expect("running trial");
        let (index, difficulty) = (trial.index, trial.difficulty);
        let profile = s.profile.clone();
        let task = s.state.task;
        let trial_seed = mix_seed(s.header.seeds.trials, ((index as u64) << 32) | attempt as u64);
        let fixture = s.spec.fixture_dir.as_ref().map(|d| d.join(format!("trial{index}.nfe")));
        let duration = self.config.trial_duration;
        let fs = self.config.sample_rate;
        let wait = if s.time_scale > 0.0 { Some(Duration::from_secs_f64(duration / s.time_scale)) } else { None };
        let tx = self.tx.clone();
        s.capture = Some(tokio::spawn(async move {
            if let Some(w) = wait {
                tokio::time::sleep(w).await;
            }
            let result = tokio::task::spawn_blocking(move || -> Result<Captured, String> {
                let state = profile.latent_state(difficulty);
                let payload = match fixture {
                    Some(path) => {
                        EegEpoch::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                        EpochPayload::Fixture { path: path.display().to_string() }
                    }
                    None => {
                        let epoch = gen_eeg_epoch(&profile, state, duration, fs, trial_seed).map_err(|e| e.to_string())?;
                        EpochPayload::inline(&epoch).map_err(|e| e.to_string())?
                    }
                };
                let performance = gen_flight_telemetry(task, difficulty, &profile, trial_seed)
                    .ok()
                    .and_then(|t| score_performance(&t, task).ok());
                Ok(Captured { payload, performance })
            })
            .await
            .unwrap_or_else(|e| Err(e.to_string()));
            let _ = tx.send(Msg::Captured { gen, attempt, result });
        }));
    }

    fn current(&mut self, gen: u64) -> Option<&mut Active> {
        self.session.as_mut().filter(|s| s.gen == gen)
    }

    fn on_captured(&mut self, gen: u64, attempt: u32, result: Result<Captured, String>) {
        let duration = self.config.trial_duration;
        let timeout = self.config.classification_timeout;
        let tx = self.tx.clone();
        let Some(s) = self.current(gen) else { return };
        if s.attempt != attempt || s.state.phase != Phase::TrialRunning {
            return;
        }
        s.capture = None;
        let index = s.state.current_trial().map(|t| t.index).unwrap_or(0);
        let captured = match result {
            Ok(c) => c,
            Err(e) => return self.fail_trial(index, format!("epoch capture failed: {e}")),
        };
        s.virtual_s += duration;
        s.state.apply(SessionEvent::EpochCaptured).expect("phase checked");
        let stamp = s.stamp();
        let t = s.state.current_trial_mut().unwrap();
        t.timestamps.captured = Some(stamp);
        t.performance = captured.performance;
        let wire = s.link.send(WireBody::EpochData { trial: index, attempt, payload: captured.payload });
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            let _ = tx.send(Msg::Timeout { gen, attempt });
        });
        // Inline samples are bulky; subscribers get the frame without them.
        let wire = strip_payload(wire);
        self.publish(EventKind::EpochCaptured, Some(index), Some(wire), None);
    }

    fn on_wire(&mut self, gen: u64, msg: WireMessage) {
        let Some(s) = self.current(gen) else { return };
        match msg.body.clone() {
            WireBody::Classification { trial, attempt, label } => {
                let current = s.state.current_trial().map(|t| t.index);
                if s.state.phase != Phase::Classifying || current != Some(trial) || attempt != s.attempt {
                    return;
                }
                self.on_label(trial, label, msg);
            }
            WireBody::Error { trial: Some(trial), attempt, code, detail } => {
                let current = s.state.current_trial().map(|t| t.index);
                if s.state.phase == Phase::Classifying && current == Some(trial) && attempt == s.attempt {
                    self.fail_trial(trial, format!("{code:?}: {detail}"));
                }
            }
            _ => {}
        }
    }

    fn on_label(&mut self, trial: usize, label: WorkloadLabel, msg: WireMessage) {
        let s = self.session.as_mut().unwrap();
        s.state.apply(SessionEvent::Labeled { label }).expect("phase checked");
        let stamp = s.stamp();
        s.state.current_trial_mut().unwrap().timestamps.classified = Some(stamp);
        let done = s.state.phase == Phase::Done;
        let set = (!done).then(|| {
            s.link.send(WireBody::SetDifficulty {
                next_trial: trial + 1,
                level: s.state.next_level,
                source: s.state.next_source,
            })
        });
        let end = s.link.send(WireBody::TrialEnd { trial });
        self.persist();
        self.publish(EventKind::Classified, Some(trial), Some(msg), None);
        if let Some(w) = set {
            self.publish(EventKind::DifficultySet, Some(trial + 1), Some(w), None);
        }
        self.publish(EventKind::TrialEnded, Some(trial), Some(end), None);
        if done {
            self.publish(EventKind::Done, None, None, None);
        }
    }

    fn fail_trial(&mut self, trial: usize, reason: String) {
        let Some(s) = self.session.as_mut() else { return };
        if s.state.apply(SessionEvent::TrialAborted).is_err() {
            return;
        }
        s.failed += 1;
        s.capture = None;
        let end = s.link.send(WireBody::Error {
            code: ErrorCode::Classification,
            detail: reason.clone(),
            trial: Some(trial),
            attempt: s.attempt,
        });
        self.persist();
        self.publish(EventKind::TrialFailed, Some(trial), Some(end), Some(reason));
    }

    fn on_timeout(&mut self, gen: u64, attempt: u32) {
        let Some(s) = self.current(gen) else { return };
        if s.attempt == attempt && s.state.phase == Phase::Classifying {
            let trial = s.state.current_trial().unwrap().index;
            self.fail_trial(trial, "classification timed out".into());
        }
    }

    fn on_link_closed(&mut self, gen: u64, reason: String) {
        let Some(s) = self.current(gen) else { return };
        if s.state.phase == Phase::Classifying {
            let trial = s.state.current_trial().unwrap().index;
            self.fail_trial(trial, format!("classifier link lost: {reason}"));
        }
    }
}

fn strip_payload(mut m: WireMessage) -> WireMessage {
    if let WireBody::EpochData { payload: EpochPayload::Inline { data, .. }, .. } = &mut m.body {
        data.clear();
    }
    m
}

fn map_violation(e: AdaptationError, command: &str) -> CommandError {
    match e {
        AdaptationError::ProtocolViolation { phase, .. } => CommandError::violation(phase, command),
        other => CommandError::new("invalid", other.to_string()),
    }
}

fn sanitize(s: &str) -> String {
    let out: String = s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if out.is_empty() {
        "session".into()
    } else {
        out
    }
}
