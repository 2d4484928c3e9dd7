use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use neuroflight::adaptation::{Condition, DifficultyLevel, DifficultySource, Phase, TaskKind};
use neuroflight::classifier::StackingModel;
use neuroflight::pipeline::{train_synthetic_model, PipelineConfig};
use neuroflight::session::{
    load_session, router, EventKind, OperatorCommand, ServiceConfig, ServiceEvent, SessionService, SessionSpec,
    WireBody,
};
use neuroflight::synth::{make_subject_profile, Archetype};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::sync::broadcast;

const SUBJECT_SEED: u64 = 7;

fn model() -> Arc<StackingModel> {
    static MODEL: OnceLock<Arc<StackingModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let p = make_subject_profile(SUBJECT_SEED, Archetype::LowWorkload);
            Arc::new(train_synthetic_model(&p, 10, 99, &PipelineConfig::standard()).unwrap())
        })
        .clone()
}

fn config(dir: Option<&std::path::Path>) -> ServiceConfig {
    ServiceConfig { model: Some(model()), data_dir: dir.map(Into::into), ..ServiceConfig::default() }
}

fn spec(condition: Condition, task: TaskKind, archetype: Archetype) -> SessionSpec {
    SessionSpec {
        subject: "p12".into(),
        condition,
        task,
        archetype,
        seed: SUBJECT_SEED,
        time_scale: None,
        fixture_dir: None,
    }
}

fn lvl(v: i64) -> DifficultyLevel {
    DifficultyLevel::new(v).unwrap()
}

async fn wait_for(events: &mut broadcast::Receiver<ServiceEvent>, kind: EventKind) -> ServiceEvent {
    tokio::time::timeout(Duration::from_secs(120), async {
        loop {
            let ev = events.recv().await.unwrap();
            if ev.kind == kind {
                return ev;
            }
        }
    })
    .await
    .expect("event did not arrive")
}

#[tokio::test(flavor = "multi_thread")]
async fn high_workload_subject_walks_down_the_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let svc = SessionService::spawn(config(Some(dir.path())));
    let t0 = Instant::now();
    let log = svc
        .run_to_completion(spec(Condition::Adaptive, TaskKind::Deceleration, Archetype::HighWorkload))
        .await
        .unwrap();
    assert!(t0.elapsed() < Duration::from_secs(60));
    let levels: Vec<u8> = log.trials.iter().map(|t| t.difficulty.get()).collect();
    assert_eq!(levels, [3, 2, 1, 1, 1]);
    assert!(log.trials.iter().all(|t| t.performance.is_some() && t.ratings.is_none()));

    let path = svc.snapshot().await.unwrap().log_path.unwrap();
    let loaded = load_session(&path).unwrap();
    assert_eq!(loaded, log);
}

#[tokio::test(flavor = "multi_thread")]
async fn fixed_order_ignores_labels() {
    let svc = SessionService::spawn(config(None));
    let log = svc
        .run_to_completion(spec(Condition::FixedOrder, TaskKind::MediumTurn, Archetype::HighWorkload))
        .await
        .unwrap();
    let levels: Vec<u8> = log.trials.iter().map(|t| t.difficulty.get()).collect();
    assert_eq!(levels, [1, 2, 3, 4, 5]);
    log.check_replay().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn operator_commands_follow_the_state_machine() {
    let svc = SessionService::spawn(config(None));
    let mut events = svc.subscribe();

    let err = svc.command(OperatorCommand::StartTrial).await.unwrap_err();
    assert_eq!(err.code, "no_session");

    svc.command(OperatorCommand::ConfigureSession(spec(
        Condition::Adaptive,
        TaskKind::MediumTurn,
        Archetype::LowWorkload,
    )))
    .await
    .unwrap();
    let started = svc.command(OperatorCommand::StartTrial).await.unwrap();
    assert_eq!(started.trials[0].difficulty, lvl(3));

    let before = svc.snapshot().await.unwrap();
    let err = svc.command(OperatorCommand::StartTrial).await.unwrap_err();
    assert_eq!(err.code, "protocol_violation");
    let after = svc.snapshot().await.unwrap();
    assert_eq!(before.trials.len(), after.trials.len());
    assert!(matches!(after.phase, Phase::TrialRunning | Phase::Classifying));

    let classified = wait_for(&mut events, EventKind::Classified).await;
    assert!(matches!(classified.wire.unwrap().body, WireBody::Classification { trial: 1, .. }));
    wait_for(&mut events, EventKind::TrialEnded).await;

    let snap = svc.command(OperatorCommand::SubmitRatings { isa: 3, f_isa: 2 }).await.unwrap();
    let r = snap.trials[0].ratings.unwrap();
    assert_eq!((r.isa, r.f_isa), (3, 2));
    assert_eq!(svc.command(OperatorCommand::SubmitRatings { isa: 0, f_isa: 2 }).await.unwrap_err().code, "invalid_ratings");

    let err = svc.command(OperatorCommand::OverrideDifficulty { level: 6, reason: String::new() }).await.unwrap_err();
    assert_eq!(err.code, "invalid_level");

    let snap = svc
        .command(OperatorCommand::OverrideDifficulty { level: 2, reason: "too hard".into() })
        .await
        .unwrap();
    assert_eq!(snap.next_level, lvl(2));
    assert_eq!(snap.next_source, DifficultySource::Override);

    let mut watch = svc.subscribe();
    svc.command(OperatorCommand::StartTrial).await.unwrap();
    let ev = wait_for(&mut watch, EventKind::TrialStarted).await;
    match ev.wire.unwrap().body {
        WireBody::StartTrial { trial, difficulty, .. } => {
            assert_eq!(trial, 2);
            assert_eq!(difficulty, lvl(2));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(ev.snapshot.trials[1].source, DifficultySource::Override);
    assert_eq!(ev.snapshot.trials[0].override_next.as_ref().unwrap().reason, "too hard");

    // Abort discards the trial; the restart reuses index and level.
    let aborted = svc.command(OperatorCommand::AbortTrial).await.unwrap();
    assert_eq!(aborted.trials.len(), 1);
    assert_eq!(aborted.aborted, 1);
    assert_eq!(aborted.phase, Phase::AwaitingNext);
    let restarted = svc.command(OperatorCommand::StartTrial).await.unwrap();
    assert_eq!(restarted.trials[1].index, 2);
    assert_eq!(restarted.trials[1].difficulty, lvl(2));
    wait_for(&mut watch, EventKind::TrialEnded).await;
    let log = svc.session_log().await.unwrap();
    log.check_replay().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn events_arrive_in_state_machine_order() {
    let svc = SessionService::spawn(config(None));
    let mut events = svc.subscribe();
    svc.run_to_completion(spec(Condition::Adaptive, TaskKind::Deceleration, Archetype::LowWorkload))
        .await
        .unwrap();
    let mut kinds = Vec::new();
    let mut last_seq = 0;
    while let Ok(ev) = events.try_recv() {
        assert!(ev.seq > last_seq);
        last_seq = ev.seq;
        kinds.push(ev.kind);
    }
    use EventKind::*;
    let mut expected = vec![Configured];
    for t in 0..5 {
        expected.extend([TrialStarted, EpochCaptured, Classified]);
        if t < 4 {
            expected.push(DifficultySet);
        }
        expected.push(TrialEnded);
    }
    expected.push(Done);
    assert_eq!(kinds, expected);
}

#[tokio::test(flavor = "multi_thread")]
async fn time_scale_paces_capture() {
    let svc = SessionService::spawn(config(None));
    let mut s = spec(Condition::Adaptive, TaskKind::Deceleration, Archetype::LowWorkload);
    s.time_scale = Some(400.0); // 120 s of trial in 0.3 s
    let mut events = svc.subscribe();
    svc.command(OperatorCommand::ConfigureSession(s)).await.unwrap();
    let t0 = Instant::now();
    svc.command(OperatorCommand::StartTrial).await.unwrap();
    let ev = wait_for(&mut events, EventKind::EpochCaptured).await;
    assert!(t0.elapsed() >= Duration::from_millis(300));
    let stamps = &ev.snapshot.trials[0].timestamps;
    assert_eq!(stamps.started.unwrap().virtual_s, 0.0);
    assert_eq!(stamps.captured.unwrap().virtual_s, 120.0);
}

async fn http(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> (u16, serde_json::Value) {
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await.unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).await.unwrap();
    let status: u16 = raw[9..12].parse().unwrap();
    let json = raw.split("\r\n\r\n").nth(1).unwrap_or("");
    (status, serde_json::from_str(json).unwrap_or(serde_json::Value::Null))
}

#[tokio::test(flavor = "multi_thread")]
async fn http_api_and_event_stream() {
    let svc = SessionService::spawn(config(None));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(svc)).await.unwrap() });

    let (status, _) = http(addr, "GET", "/api/session", "").await;
    assert_eq!(status, 404);

    let mut sse = tokio::net::TcpStream::connect(addr).await.unwrap();
    sse.write_all(b"GET /api/events HTTP/1.1\r\nHost: x\r\nAccept: text/event-stream\r\n\r\n").await.unwrap();
    let mut sse = BufReader::new(sse);

    let (status, body) = http(
        addr,
        "POST",
        "/api/session",
        r#"{"condition":"adaptive","task":"medium_turn","archetype":{"kind":"low_workload"},"seed":7}"#,
    )
    .await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["snapshot"]["next_level"], 3);

    let (status, _) = http(addr, "POST", "/api/session/start", "").await;
    assert_eq!(status, 200);
    let (status, body) = http(addr, "POST", "/api/session/start", "").await;
    assert_eq!(status, 409);
    assert_eq!(body["error"]["code"], "protocol_violation");

    // Read the stream until the first trial has ended.
    let mut seen = Vec::new();
    let mut line = String::new();
    tokio::time::timeout(Duration::from_secs(60), async {
        loop {
            line.clear();
            sse.read_line(&mut line).await.unwrap();
            if let Some(kind) = line.trim_end().strip_prefix("event: ") {
                seen.push(kind.to_string());
                if kind == "trial_ended" {
                    break;
                }
            }
        }
    })
    .await
    .unwrap();
    assert_eq!(seen, ["configured", "trial_started", "epoch_captured", "classified", "difficulty_set", "trial_ended"]);

    let (status, body) = http(addr, "POST", "/api/session/ratings", r#"{"isa":3,"f_isa":2}"#).await;
    assert_eq!(status, 200);
    assert_eq!(body["snapshot"]["trials"][0]["ratings"]["isa"], 3);
    let (status, body) = http(addr, "POST", "/api/session/override", r#"{"level":6}"#).await;
    assert_eq!(status, 422);
    assert_eq!(body["error"]["code"], "invalid_level");
    let (status, body) = http(addr, "POST", "/api/session/override", r#"{"level":4,"reason":"check"}"#).await;
    assert_eq!(status, 200);
    assert_eq!(body["snapshot"]["next_source"], "override");
    let (_, body) = http(addr, "GET", "/api/session", "").await;
    assert_eq!(body["snapshot"]["phase"], "awaiting_next");
}
