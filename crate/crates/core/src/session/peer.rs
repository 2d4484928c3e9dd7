//! The classifier side of the wire: turns epochs into workload labels.

use std::path::PathBuf;
use std::sync::Arc;

use tokio::io::{AsyncRead, AsyncWrite, BufReader};

use super::protocol::{ErrorCode, FrameReader, FrameWriter, WireBody, WireError};
use crate::classifier::{predict_label, StackingModel, WorkloadLabel};
use crate::pipeline::{extract_model_input, PipelineConfig};
use crate::signal::EegEpoch;

#[derive(Clone)]
pub struct ClassifierPeer {
    model: Arc<StackingModel>,
    pipeline: Arc<PipelineConfig>,
    fixture_base: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PeerStats {
    pub received: usize,
    pub classified: usize,
    pub errors: usize,
}

pub fn classify_epoch(
    model: &StackingModel,
    pipeline: &PipelineConfig,
    epoch: &EegEpoch,
) -> Result<WorkloadLabel, String> {
    let x = extract_model_input(epoch, pipeline).map_err(|e| e.to_string())?;
    predict_label(model, x.as_slice()).map_err(|e| e.to_string())
}

impl ClassifierPeer {
    pub fn new(model: Arc<StackingModel>, pipeline: PipelineConfig) -> Self {
        Self { model, pipeline: Arc::new(pipeline), fixture_base: None }
    }

    /// Directory that relative fixture references resolve against.
    pub fn with_fixture_base(mut self, dir: impl Into<PathBuf>) -> Self {
        self.fixture_base = Some(dir.into());
        self
    }

    /// Serves one connection until the host closes it.
    pub async fn serve<R, W>(&self, reader: R, writer: W) -> Result<PeerStats, WireError>
    where
        R: AsyncRead + Unpin,
        W: AsyncWrite + Unpin,
    {
        let mut frames = FrameReader::new(BufReader::new(reader));
        let mut out = FrameWriter::new(writer);
        let mut stats = PeerStats::default();
        loop {
            let msg = match frames.next().await {
                Ok(Some(m)) => m,
                Ok(None) => return Ok(stats),
                Err(e @ (WireError::Decode { .. } | WireError::Version { .. })) => {
                    stats.errors += 1;
                    let code = if matches!(e, WireError::Version { .. }) { ErrorCode::Version } else { ErrorCode::Decode };
                    out.send(WireBody::Error { code, detail: e.to_string(), trial: None, attempt: 0 }).await?;
                    continue;
                }
                Err(e) => {
                    let _ = out
                        .send(WireBody::Error { code: ErrorCode::Protocol, detail: e.to_string(), trial: None, attempt: 0 })
                        .await;
                    return Err(e);
                }
            };
            stats.received += 1;
            if let WireBody::EpochData { trial, attempt, payload } = msg.body {
                let model = self.model.clone();
                let pipeline = self.pipeline.clone();
                let base = self.fixture_base.clone();
                let result = tokio::task::spawn_blocking(move || {
                    let epoch = payload.to_epoch(base.as_deref()).map_err(|e| (ErrorCode::Epoch, e.to_string()))?;
                    classify_epoch(&model, &pipeline, &epoch).map_err(|e| (ErrorCode::Classification, e))
                })
                .await
                .unwrap_or_else(|e| Err((ErrorCode::Internal, e.to_string())));
                let reply = match result {
                    Ok(label) => {
                        stats.classified += 1;
                        WireBody::Classification { trial, attempt, label }
                    }
                    Err((code, detail)) => {
                        stats.errors += 1;
                        WireBody::Error { code, detail, trial: Some(trial), attempt }
                    }
                };
                out.send(reply).await?;
            }
        }
    }
}
