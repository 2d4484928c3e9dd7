//! Newline-delimited JSON frames exchanged between the simulator host and the
//! classifier peer. See `docs/protocol.md` for the field-by-field layout.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::adaptation::{Condition, DifficultyLevel, DifficultySource, TaskKind};
use crate::classifier::WorkloadLabel;
use crate::signal::{ChannelMontage, EegEpoch};

pub const WIRE_VERSION: u32 = 1;
/// Largest decoded inline epoch payload.
pub const MAX_INLINE_BYTES: usize = 16 * 1024 * 1024;
/// Largest accepted frame, newline included.
pub const MAX_FRAME_BYTES: usize = MAX_INLINE_BYTES / 3 * 4 + 64 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed frame at byte {offset}: {message}")]
    Decode { offset: usize, message: String },
    #[error("unsupported wire version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("frame exceeds {MAX_FRAME_BYTES} bytes")]
    Oversize,
    #[error("connection closed mid-frame after {0} bytes")]
    Truncated(usize),
    #[error("sequence number {got} does not follow {last}")]
    Sequence { last: u64, got: u64 },
    #[error("epoch payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Protocol,
    Decode,
    Version,
    Epoch,
    Classification,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpochPayload {
    /// Samples as little-endian f64, channel-major, base64 encoded.
    Inline { labels: Vec<String>, sample_rate: f64, n_samples: usize, data: String },
    /// Path to an epoch file readable by the receiver.
    Fixture { path: String },
}

impl EpochPayload {
    pub fn inline(epoch: &EegEpoch) -> Result<Self, WireError> {
        let bytes = epoch.n_channels() * epoch.n_samples() * 8;
        if bytes > MAX_INLINE_BYTES {
            return Err(WireError::Payload(format!("{bytes} bytes exceeds inline cap {MAX_INLINE_BYTES}")));
        }
        let mut raw = Vec::with_capacity(bytes);
        for row in epoch.channels() {
            for v in row {
                raw.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(EpochPayload::Inline {
            labels: epoch.montage().labels().to_vec(),
            sample_rate: epoch.sample_rate(),
            n_samples: epoch.n_samples(),
            data: B64.encode(raw),
        })
    }

    /// Materialises the epoch; fixture paths are resolved against `base`.
    pub fn to_epoch(&self, base: Option<&std::path::Path>) -> Result<EegEpoch, WireError> {
        match self {
            EpochPayload::Inline { labels, sample_rate, n_samples, data } => {
                let raw = B64.decode(data).map_err(|e| WireError::Payload(e.to_string()))?;
                if raw.len() > MAX_INLINE_BYTES {
                    return Err(WireError::Payload("inline payload over cap".into()));
                }
                if raw.len() != labels.len() * n_samples * 8 {
                    return Err(WireError::Payload(format!(
                        "{} bytes for {} channels x {n_samples} samples",
                        raw.len(),
                        labels.len()
                    )));
                }
                let montage = ChannelMontage::new(labels.clone()).map_err(|e| WireError::Payload(e.to_string()))?;
                let samples = raw
                    .chunks_exact(n_samples * 8)
                    .map(|ch| ch.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
                    .collect();
                EegEpoch::new(montage, *sample_rate, samples).map_err(|e| WireError::Payload(e.to_string()))
            }
            EpochPayload::Fixture { path } => {
                let p = std::path::Path::new(path);
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.to_path_buf(),
                };
                EegEpoch::load(&full).map_err(|e| WireError::Payload(format!("{}: {e}", full.display())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireBody {
    StartTrial {
        session: String,
        trial: usize,
        condition: Condition,
        task: TaskKind,
        difficulty: DifficultyLevel,
    },
    EpochData {
        trial: usize,
        #[serde(default)]
        attempt: u32,
        payload: EpochPayload,
    },
    Classification {
        trial: usize,
        #[serde(default)]
        attempt: u32,
        label: WorkloadLabel,
    },
    SetDifficulty {
        next_trial: usize,
        level: DifficultyLevel,
        source: DifficultySource,
    },
    TrialEnd {
        trial: usize,
    },
    Error {
        code: ErrorCode,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trial: Option<usize>,
        #[serde(default)]
        attempt: u32,
    },
}

impl WireBody {
    pub fn name(&self) -> &'static str {
        match self {
            WireBody::StartTrial { .. } => "start_trial",
            WireBody::EpochData { .. } => "epoch_data",
            WireBody::Classification { .. } => "classification",
            WireBody::SetDifficulty { .. } => "set_difficulty",
            WireBody::TrialEnd { .. } => "trial_end",
            WireBody::Error { .. } => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub seq: u64,
    pub body: WireBody,
}

impl WireMessage {
    pub fn new(seq: u64, body: WireBody) -> Self {
        Self { v: WIRE_VERSION, seq, body }
    }
}

/// One frame: compact JSON followed by `\n`.
pub fn encode_message(m: &WireMessage) -> Vec<u8> {
    let mut out = serde_json::to_vec(m).expect("wire types always serialise");
    out.push(b'\n');
    out
}

/// Frames are single-line, so the 1-based column is the byte offset.
fn offset_of(e: &serde_json::Error) -> usize {
    e.column().saturating_sub(1)
}

#[derive(Deserialize)]
struct VersionProbe {
    v: u32,
}

/// Parses one frame. A trailing newline is optional; unknown fields are ignored.
pub fn decode_message(frame: &[u8]) -> Result<WireMessage, WireError> {
    let body = frame.strip_suffix(b"\n").unwrap_or(frame);
    let body = body.strip_suffix(b"\r").unwrap_or(body);
    if body.contains(&b'\n') {
        let offset = body.iter().position(|b| *b == b'\n').unwrap();
        return Err(WireError::Decode { offset, message: "embedded newline".into() });
    }
    let probe: VersionProbe = serde_json::from_slice(body)
        .map_err(|e| WireError::Decode { offset: offset_of(&e), message: e.to_string() })?;
    if probe.v != WIRE_VERSION {
        return Err(WireError::Version { found: probe.v, expected: WIRE_VERSION });
    }
    serde_json::from_slice(body).map_err(|e| WireError::Decode { offset: offset_of(&e), message: e.to_string() })
}

/// Reads frames and enforces strictly increasing sequence numbers.
pub struct FrameReader<R> {
    inner: R,
    last_seq: Option<u64>,
    buf: Vec<u8>,
}

impl<R: AsyncBufRead + Unpin> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, last_seq: None, buf: Vec::new() }
    }

    /// `Ok(None)` on a clean end of stream.
    pub async fn next(&mut self) -> Result<Option<WireMessage>, WireError> {
        self.buf.clear();
        let n = (&mut self.inner).take(MAX_FRAME_BYTES as u64).read_until(b'\n', &mut self.buf).await?;
        if n == 0 {
            return Ok(None);
        }
        if self.buf.last() != Some(&b'\n') {
            if n >= MAX_FRAME_BYTES {
                return Err(WireError::Oversize);
            }
            return Err(WireError::Truncated(n));
        }
        let msg = decode_message(&self.buf)?;
        if let Some(last) = self.last_seq {
            if msg.seq <= last {
                return Err(WireError::Sequence { last, got: msg.seq });
            }
        }
        self.last_seq = Some(msg.seq);
        Ok(Some(msg))
    }
}

/// Writes frames, numbering them from 1.
pub struct FrameWriter<W> {
    inner: W,
    next_seq: u64,
}

impl<W: AsyncWrite + Unpin> FrameWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner, next_seq: 1 }
    }

    pub async fn send(&mut self, body: WireBody) -> Result<WireMessage, WireError> {
        let msg = WireMessage::new(self.next_seq, body);
        self.next_seq += 1;
        self.inner.write_all(&encode_message(&msg)).await?;
        self.inner.flush().await?;
        Ok(msg)
    }
}
