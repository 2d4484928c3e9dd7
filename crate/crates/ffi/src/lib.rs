//! C interface to the neuroflight pipeline, classifier and difficulty controller.
//!
//! Every fallible function returns an [`NfStatus`]; on failure a message for
//! the calling thread is available from [`nf_last_error`]. Objects are opaque
//! handles created by `*_new`/`*_load` functions and released by the matching
//! `*_free`. Passing a handle to its free function twice is undefined.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use neuroflight::adaptation::{
    next_difficulty, run_condition, AdaptationError, Condition, DifficultyLevel, Phase, SessionEvent, SessionState,
    TaskKind, TRIALS_PER_SESSION,
};
use neuroflight::analysis::fisher_z_compare;
use neuroflight::classifier::{predict_label, StackingModel, WorkloadLabel};
use neuroflight::features::MODEL_FEATURE_COUNT;
use neuroflight::pipeline::{extract_model_input, PipelineConfig};
use neuroflight::signal::{engagement_index, ChannelMontage, EegEpoch};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLevel = 3,
    ProtocolViolation = 4,
    Io = 5,
    Format = 6,
    Signal = 7,
    Classifier = 8,
    Undefined = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfLabel {
    Low = 0,
    High = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfCondition {
    FixedOrder = 0,
    Adaptive = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfTask {
    Deceleration = 0,
    MediumTurn = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfPhase {
    Idle = 0,
    TrialRunning = 1,
    Classifying = 2,
    AwaitingNext = 3,
    Done = 4,
}

/// A multichannel EEG epoch on the standard 32-channel montage.
pub struct NfEpoch(EegEpoch);

/// A trained stacking classifier.
pub struct NfModel(StackingModel);

/// A five-trial session state machine.
pub struct NfSession(SessionState);

/// Number of values written by [`nf_extract_model_features`].
pub const NF_MODEL_FEATURES: usize = 10;
/// Trials in one session.
pub const NF_TRIALS_PER_SESSION: usize = 5;

const _: () = assert!(NF_MODEL_FEATURES == MODEL_FEATURE_COUNT && NF_TRIALS_PER_SESSION == TRIALS_PER_SESSION);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: NfStatus, msg: impl Into<String>) -> NfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> NfStatus) -> NfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(NfStatus::Panic, "internal panic"))
}

impl From<NfLabel> for WorkloadLabel {
    fn from(l: NfLabel) -> Self {
        match l {
            NfLabel::Low => WorkloadLabel::Low,
            NfLabel::High => WorkloadLabel::High,
        }
    }
}

impl From<WorkloadLabel> for NfLabel {
    fn from(l: WorkloadLabel) -> Self {
        match l {
            WorkloadLabel::Low => NfLabel::Low,
            WorkloadLabel::High => NfLabel::High,
        }
    }
}

impl From<NfCondition> for Condition {
    fn from(c: NfCondition) -> Self {
        match c {
            NfCondition::FixedOrder => Condition::FixedOrder,
            NfCondition::Adaptive => Condition::Adaptive,
        }
    }
}

impl From<NfTask> for TaskKind {
    fn from(t: NfTask) -> Self {
        match t {
            NfTask::Deceleration => TaskKind::Deceleration,
            NfTask::MediumTurn => TaskKind::MediumTurn,
        }
    }
}

impl From<Phase> for NfPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Idle => NfPhase::Idle,
            Phase::TrialRunning => NfPhase::TrialRunning,
            Phase::Classifying => NfPhase::Classifying,
            Phase::AwaitingNext => NfPhase::AwaitingNext,
            Phase::Done => NfPhase::Done,
        }
    }
}

fn adaptation_status(e: AdaptationError) -> NfStatus {
    let status = match e {
        AdaptationError::InvalidLevel(_) => NfStatus::InvalidLevel,
        AdaptationError::ProtocolViolation { .. } => NfStatus::ProtocolViolation,
        _ => NfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn level(v: u8) -> Result<DifficultyLevel, NfStatus> {
    DifficultyLevel::new(v as i64).map_err(adaptation_status)
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, NfStatus> {
    if path.is_null() {
        return Err(fail(NfStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(NfStatus::InvalidArgument, "path is not valid UTF-8"))
}

macro_rules! try_nf {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(NfStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn nf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Level for the trial after one at `current` classified as `label`.
///
/// # Safety
/// `out` must point to writable memory for one byte.
#[no_mangle]
pub unsafe extern "C" fn nf_next_difficulty(current: u8, label: NfLabel, out: *mut u8) -> NfStatus {
    guard(|| {
        non_null!(out);
        let current = try_nf!(level(current));
        *out = next_difficulty(current, label.into()).get();
        NfStatus::Ok
    })
}

/// Difficulty sequence of a session given the label of each trial.
///
/// # Safety
/// `labels` must point to `n` readable labels and `out_levels` to `n`
/// writable bytes; `n` must equal `NF_TRIALS_PER_SESSION`.
#[no_mangle]
pub unsafe extern "C" fn nf_run_condition(
    condition: NfCondition,
    labels: *const NfLabel,
    n: usize,
    out_levels: *mut u8,
) -> NfStatus {
    guard(|| {
        non_null!(labels, out_levels);
        if n != TRIALS_PER_SESSION {
            return fail(NfStatus::InvalidArgument, format!("{n} labels, a session has {TRIALS_PER_SESSION}"));
        }
        let labels = std::slice::from_raw_parts(labels, n);
        let trace = try_nf!(run_condition(condition.into(), labels.iter().map(|&l| l.into())).map_err(adaptation_status));
        for (i, (lvl, _)) in trace.iter().enumerate() {
            *out_levels.add(i) = lvl.get();
        }
        NfStatus::Ok
    })
}

/// `beta / (alpha + theta)` for band powers in µV².
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_engagement_index(theta: f64, alpha: f64, beta: f64, out: *mut f64) -> NfStatus {
    guard(|| {
        non_null!(out);
        match engagement_index(theta, alpha, beta) {
            Ok(v) => {
                *out = v;
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Signal, e.to_string()),
        }
    })
}

/// Fisher z comparison of two independent correlations.
///
/// # Safety
/// `out_z` and `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_fisher_z_compare(
    r1: f64,
    n1: usize,
    r2: f64,
    n2: usize,
    out_z: *mut f64,
    out_p: *mut f64,
) -> NfStatus {
    guard(|| {
        non_null!(out_z, out_p);
        match fisher_z_compare(r1, n1, r2, n2) {
            Ok(r) => {
                *out_z = r.z;
                *out_p = r.p;
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Undefined, e.to_string()),
        }
    })
}

/// Builds an epoch from channel-major samples in µV on the standard montage.
///
/// # Safety
/// `samples` must point to `n_channels * n_samples` readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_epoch_new(
    samples: *const f64,
    n_channels: usize,
    n_samples: usize,
    sample_rate: f64,
    out: *mut *mut NfEpoch,
) -> NfStatus {
    guard(|| {
        non_null!(samples, out);
        let montage = ChannelMontage::standard();
        if n_channels != montage.len() || n_samples == 0 {
            return fail(
                NfStatus::InvalidArgument,
                format!("expected {} channels and at least one sample", montage.len()),
            );
        }
        let flat = std::slice::from_raw_parts(samples, n_channels * n_samples);
        let rows = flat.chunks_exact(n_samples).map(<[f64]>::to_vec).collect();
        match EegEpoch::new(montage, sample_rate, rows) {
            Ok(e) => {
                *out = Box::into_raw(Box::new(NfEpoch(e)));
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Signal, e.to_string()),
        }
    })
}

/// Reads an epoch file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_epoch_load(path: *const c_char, out: *mut *mut NfEpoch) -> NfStatus {
    guard(|| {
        non_null!(out);
        let path = try_nf!(path_arg(path));
        match EegEpoch::load(&path) {
            Ok(e) => {
                *out = Box::into_raw(Box::new(NfEpoch(e)));
                NfStatus::Ok
            }
            Err(neuroflight::signal::SignalError::Io(e)) => fail(NfStatus::Io, e.to_string()),
            Err(e) => fail(NfStatus::Format, e.to_string()),
        }
    })
}

/// # Safety
/// `epoch` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_epoch_free(epoch: *mut NfEpoch) {
    if !epoch.is_null() {
        drop(Box::from_raw(epoch));
    }
}

/// Writes the ten model features of an epoch into `out`.
///
/// # Safety
/// `epoch` must be a live handle and `out` must have room for
/// `NF_MODEL_FEATURES` doubles.
#[no_mangle]
pub unsafe extern "C" fn nf_extract_model_features(epoch: *const NfEpoch, remove_artifacts: bool, out: *mut f64) -> NfStatus {
    guard(|| {
        non_null!(epoch, out);
        let mut cfg = PipelineConfig::standard();
        if !remove_artifacts {
            cfg.artifact = None;
        }
        match extract_model_input(&(*epoch).0, &cfg) {
            Ok(v) => {
                std::ptr::copy_nonoverlapping(v.0.as_ptr(), out, MODEL_FEATURE_COUNT);
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Signal, e.to_string()),
        }
    })
}

/// Loads a model written by `neuroflight train --model-out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_load(path: *const c_char, out: *mut *mut NfModel) -> NfStatus {
    guard(|| {
        non_null!(out);
        let path = try_nf!(path_arg(path));
        match StackingModel::load(&path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(NfModel(m)));
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Classifier, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_model_free(model: *mut NfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies one feature row of length `n`.
///
/// # Safety
/// `model` must be live, `features` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_predict(
    model: *const NfModel,
    features: *const f64,
    n: usize,
    out: *mut NfLabel,
) -> NfStatus {
    guard(|| {
        non_null!(model, features, out);
        let x = std::slice::from_raw_parts(features, n);
        match predict_label(&(*model).0, x) {
            Ok(l) => {
                *out = l.into();
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Classifier, e.to_string()),
        }
    })
}

/// Runs the full pipeline on an epoch and classifies it.
///
/// # Safety
/// `model` and `epoch` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_model_classify_epoch(
    model: *const NfModel,
    epoch: *const NfEpoch,
    out: *mut NfLabel,
) -> NfStatus {
    guard(|| {
        non_null!(model, epoch, out);
        let x = match extract_model_input(&(*epoch).0, &PipelineConfig::standard()) {
            Ok(x) => x,
            Err(e) => return fail(NfStatus::Signal, e.to_string()),
        };
        match predict_label(&(*model).0, x.as_slice()) {
            Ok(l) => {
                *out = l.into();
                NfStatus::Ok
            }
            Err(e) => fail(NfStatus::Classifier, e.to_string()),
        }
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_session_new(condition: NfCondition, task: NfTask, out: *mut *mut NfSession) -> NfStatus {
    guard(|| {
        non_null!(out);
        *out = Box::into_raw(Box::new(NfSession(SessionState::new(condition.into(), task.into()))));
        NfStatus::Ok
    })
}

/// # Safety
/// `session` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_session_free(session: *mut NfSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn apply(session: *mut NfSession, event: SessionEvent) -> NfStatus {
    non_null!(session);
    match (*session).0.apply(event) {
        Ok(()) => NfStatus::Ok,
        Err(e) => adaptation_status(e),
    }
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_session_start_trial(session: *mut NfSession) -> NfStatus {
    guard(|| apply(session, SessionEvent::TrialStarted))
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_session_epoch_captured(session: *mut NfSession) -> NfStatus {
    guard(|| apply(session, SessionEvent::EpochCaptured))
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_session_label(session: *mut NfSession, label: NfLabel) -> NfStatus {
    guard(|| apply(session, SessionEvent::Labeled { label: label.into() }))
}

/// Replaces the level of the next trial.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_session_override(session: *mut NfSession, level_value: u8) -> NfStatus {
    guard(|| {
        let lvl = try_nf!(level(level_value));
        apply(session, SessionEvent::OperatorOverride { level: lvl, reason: String::new() })
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_session_abort(session: *mut NfSession) -> NfStatus {
    guard(|| apply(session, SessionEvent::TrialAborted))
}

/// # Safety
/// `session` must be a live handle; `phase` and `next_level` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_session_status(
    session: *const NfSession,
    phase: *mut NfPhase,
    next_level: *mut u8,
) -> NfStatus {
    guard(|| {
        non_null!(session, phase, next_level);
        *phase = (*session).0.phase.into();
        *next_level = (*session).0.next_level.get();
        NfStatus::Ok
    })
}

/// Copies the levels of all started trials into `out` (capacity `cap`) and
/// stores their count in `out_len`.
///
/// # Safety
/// `session` must be live, `out` must have `cap` writable bytes and
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_session_trace(
    session: *const NfSession,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> NfStatus {
    guard(|| {
        non_null!(session, out, out_len);
        let trials = &(*session).0.trials;
        *out_len = trials.len();
        if trials.len() > cap {
            return fail(NfStatus::InvalidArgument, format!("buffer holds {cap}, need {}", trials.len()));
        }
        for (i, t) in trials.iter().enumerate() {
            *out.add(i) = t.difficulty.get();
        }
        NfStatus::Ok
    })
}
