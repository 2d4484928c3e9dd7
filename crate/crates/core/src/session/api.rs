//! Operator HTTP API.
//!
//! | method | path                    | body                         |
//! |--------|-------------------------|------------------------------|
//! | POST   | `/api/session`          | `SessionSpec`                |
//! | POST   | `/api/session/start`    |                              |
//! | POST   | `/api/session/abort`    |                              |
//! | POST   | `/api/session/ratings`  | `{"isa": 3, "f_isa": 2}`     |
//! | POST   | `/api/session/override` | `{"level": 4, "reason": ""}` |
//! | GET    | `/api/session`          |                              |
//! | GET    | `/api/events`           | server-sent `ServiceEvent`s  |

use std::convert::Infallible;
use std::net::SocketAddr;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::json;
use tokio_stream::wrappers::errors::BroadcastStreamRecvError;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::StreamExt;

use super::service::{CommandError, OperatorCommand, SessionService, SessionSpec};

#[derive(Deserialize)]
struct Ratings {
    isa: u8,
    f_isa: u8,
}

#[derive(Deserialize)]
struct Override {
    level: i64,
    #[serde(default)]
    reason: String,
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "protocol_violation" => StatusCode::CONFLICT,
        "no_session" => StatusCode::NOT_FOUND,
        "invalid_level" | "invalid_ratings" | "config" | "invalid" => StatusCode::UNPROCESSABLE_ENTITY,
        "peer_unavailable" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn run(service: &SessionService, cmd: OperatorCommand) -> Response {
    match service.command(cmd).await {
        Ok(snapshot) => Json(json!({ "ok": true, "snapshot": snapshot })).into_response(),
        Err(e) => rejection(service, e).await,
    }
}

async fn rejection(service: &SessionService, e: CommandError) -> Response {
    let snapshot = service.snapshot().await;
    (status_for(&e.code), Json(json!({ "ok": false, "error": e, "snapshot": snapshot }))).into_response()
}

async fn configure(State(s): State<SessionService>, Json(spec): Json<SessionSpec>) -> Response {
    run(&s, OperatorCommand::ConfigureSession(spec)).await
}

async fn start(State(s): State<SessionService>) -> Response {
    run(&s, OperatorCommand::StartTrial).await
}

async fn abort(State(s): State<SessionService>) -> Response {
    run(&s, OperatorCommand::AbortTrial).await
}

async fn ratings(State(s): State<SessionService>, Json(r): Json<Ratings>) -> Response {
    run(&s, OperatorCommand::SubmitRatings { isa: r.isa, f_isa: r.f_isa }).await
}

async fn override_level(State(s): State<SessionService>, Json(o): Json<Override>) -> Response {
    run(&s, OperatorCommand::OverrideDifficulty { level: o.level, reason: o.reason }).await
}

async fn snapshot(State(s): State<SessionService>) -> Response {
    match s.snapshot().await {
        Some(snap) => Json(json!({ "ok": true, "snapshot": snap })).into_response(),
        None => rejection(&s, CommandError { code: "no_session".into(), message: "no session configured".into(), phase: None })
            .await,
    }
}

async fn events(State(s): State<SessionService>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let stream = BroadcastStream::new(s.subscribe()).map(|item| {
        Ok(match item {
            Ok(ev) => Event::default()
                .event(serde_json::to_value(ev.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
                .id(ev.seq.to_string())
                .json_data(&ev)
                .unwrap_or_else(|_| Event::default().comment("unserialisable event")),
            Err(BroadcastStreamRecvError::Lagged(n)) => Event::default().event("lagged").data(n.to_string()),
        })
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

pub fn router(service: SessionService) -> Router {
    Router::new()
        .route("/api/session", post(configure).get(snapshot))
        .route("/api/session/start", post(start))
        .route("/api/session/abort", post(abort))
        .route("/api/session/ratings", post(ratings))
        .route("/api/session/override", post(override_level))
        .route("/api/events", get(events))
        .with_state(service)
}

/// Serves the operator API until the listener fails.
pub async fn serve_http(service: SessionService, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("operator API listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
