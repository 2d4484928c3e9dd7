//! Orchestration: the wire protocol to the classifier peer, the session
//! actor that runs trials, persistence, and the operator HTTP API.

mod api;
mod log;
mod peer;
mod protocol;
mod replay;
mod service;

pub use api::{router, serve_http};
pub use log::{
    load_session, persist_session, LogError, SessionHeader, SessionLog, SessionSeeds, LOG_FORMAT, LOG_VERSION,
};
pub use peer::{classify_epoch, ClassifierPeer, PeerStats};
pub use protocol::{
    decode_message, encode_message, EpochPayload, ErrorCode, FrameReader, FrameWriter, WireBody, WireError,
    WireMessage, MAX_FRAME_BYTES, MAX_INLINE_BYTES, WIRE_VERSION,
};
pub use replay::{read_replay_table, replay_table, ReplayOutcome, ReplayRow};
pub use service::{
    CommandError, EventKind, OperatorCommand, ServiceConfig, ServiceEvent, SessionService, SessionSpec, Snapshot,
};
