use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use neuroflight::adaptation::{Condition, DifficultyLevel, TaskKind};
use neuroflight::analysis::{observations_from_log, read_questionnaires, study_report};
use neuroflight::classifier::{
    evaluate_repeated, fit_stacking, Dataset, EvalConfig, HyperparameterGrid, StackingModel, StackingParams,
    WorkloadLabel,
};
use neuroflight::features::{canonical_keys, read_feature_csv, write_feature_csv};
use neuroflight::flightperf::{score_performance, FlightTelemetry};
use neuroflight::pipeline::{extract_features, synthetic_dataset, PipelineConfig};
use neuroflight::session::{
    load_session, read_replay_table, replay_table, serve_http, ClassifierPeer, ServiceConfig, SessionLog,
    SessionService, SessionSpec,
};
use neuroflight::signal::{ChannelMontage, EegEpoch, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE};
use neuroflight::synth::{gen_eeg_epoch, gen_flight_telemetry, make_subject_profile, mix_seed, Archetype};

#[derive(Parser)]
#[command(name = "neuroflight", version, about = "EEG workload classification and adaptive flight-training sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit and evaluate the stacking classifier.
    Train(TrainArgs),
    /// Run one five-trial session with a loopback or remote classifier.
    Run(RunArgs),
    /// Check session logs or a golden table against the adaptation rule.
    Replay(ReplayArgs),
    /// Score telemetry files; one delimited row per file.
    Score(ScoreArgs),
    /// Run the statistics battery over session logs and questionnaires.
    Analyze(AnalyzeArgs),
    /// Write synthetic fixture files.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Serve the operator API.
    Serve(ServeArgs),
    /// Run a classifier peer that accepts simulator connections.
    Peer(PeerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliCondition {
    Fixed,
    Adaptive,
}

impl From<CliCondition> for Condition {
    fn from(c: CliCondition) -> Self {
        match c {
            CliCondition::Fixed => Condition::FixedOrder,
            CliCondition::Adaptive => Condition::Adaptive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliTask {
    Decel,
    Turn,
}

impl From<CliTask> for TaskKind {
    fn from(t: CliTask) -> Self {
        match t {
            CliTask::Decel => TaskKind::Deceleration,
            CliTask::Turn => TaskKind::MediumTurn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliLabel {
    Low,
    High,
}

impl From<CliLabel> for WorkloadLabel {
    fn from(l: CliLabel) -> Self {
        match l {
            CliLabel::Low => WorkloadLabel::Low,
            CliLabel::High => WorkloadLabel::High,
        }
    }
}

#[derive(Args)]
struct PipelineFlags {
    /// Skip ocular-artifact removal.
    #[arg(long)]
    no_ica: bool,
}

impl PipelineFlags {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::standard();
        if self.no_ica {
            cfg.artifact = None;
        }
        cfg
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Feature CSV to train on; synthetic epochs are generated when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Synthetic epochs per class.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Epoch length of synthetic epochs in seconds.
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 0.30)]
    test_fraction: f64,
    /// Use default hyperparameters instead of a grid search.
    #[arg(long)]
    no_grid: bool,
    /// Permute labels before evaluating (chance-level check).
    #[arg(long)]
    shuffle_labels: bool,
    /// Fit on all data and write the model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    condition: CliCondition,
    #[arg(long, value_enum)]
    task: CliTask,
    /// `low`, `high` or `threshold:N`.
    #[arg(long, default_value = "threshold:3")]
    subject_archetype: Archetype,
    #[arg(long, default_value = "synthetic")]
    subject: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Virtual seconds per wall second; 0 runs as fast as possible.
    #[arg(long, env = "NEUROFLIGHT_TIME_SCALE", default_value_t = 0.0)]
    time_scale: f64,
    /// Pre-trained model; otherwise one is trained for the subject.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Address of a running `peer`; in-process loopback when unset.
    #[arg(long, env = "NEUROFLIGHT_WIRE_ADDR")]
    wire_addr: Option<String>,
    #[arg(long, env = "NEUROFLIGHT_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Directory of `trial<N>.nfe` epochs to stream instead of synthesising.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct ReplayArgs {
    /// Session logs (`.jsonl`) or golden tables (`.csv`).
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    task: CliTask,
    #[arg(required = true)]
    telemetry: Vec<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Session log files.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Questionnaire CSV (`subject,condition,task,instrument,items...`).
    #[arg(long = "questionnaires", short = 'q')]
    questionnaires: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// One EEG epoch in the binary epoch format.
    Eeg {
        #[arg(long, value_enum)]
        state: CliLabel,
        #[arg(long, default_value = "high")]
        archetype: Archetype,
        #[arg(long, default_value_t = 0)]
        subject_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DURATION)]
        duration: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// One telemetry trace as CSV.
    Telemetry {
        #[arg(long, value_enum)]
        task: CliTask,
        #[arg(long, default_value_t = 3)]
        difficulty: i64,
        #[arg(long, default_value_t = 0)]
        subject_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// A feature CSV (all 128 features) of labelled synthetic epochs.
    Features {
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        subject_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineFlags,
    },
    /// Five `trial<N>.nfe` epochs for `run --fixtures`.
    Session {
        #[arg(long, default_value = "high")]
        archetype: Archetype,
        #[arg(long, default_value_t = 0)]
        subject_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "NEUROFLIGHT_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "NEUROFLIGHT_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, env = "NEUROFLIGHT_TIME_SCALE", default_value_t = 0.0)]
    time_scale: f64,
    #[arg(long, env = "NEUROFLIGHT_WIRE_ADDR")]
    wire_addr: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct PeerArgs {
    #[arg(long, env = "NEUROFLIGHT_WIRE_ADDR", default_value = "127.0.0.1:7878")]
    listen: SocketAddr,
    /// Model file; otherwise one is trained on a synthetic subject.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    subject_seed: u64,
    /// Directory that fixture references resolve against.
    #[arg(long)]
    fixture_base: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Run(a) => run(a),
        Command::Replay(a) => replay(a),
        Command::Score(a) => score(a),
        Command::Analyze(a) => analyze(a),
        Command::Synth(c) => synth(c),
        Command::Serve(a) => serve(a),
        Command::Peer(a) => peer(a),
    };
    match result {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn load_model(path: Option<&Path>) -> Result<Option<Arc<StackingModel>>> {
    path.map(|p| {
        StackingModel::load(p).map(Arc::new).with_context(|| format!("loading model {}", p.display()))
    })
    .transpose()
}

fn shuffled(data: &Dataset, seed: u64) -> Result<Dataset> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut labels = data.labels().to_vec();
    labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    Ok(Dataset::new(data.rows().to_vec(), labels)?)
}

fn train(a: TrainArgs) -> Result<bool> {
    let pipeline = a.pipeline.config();
    let mut data = match &a.features {
        Some(path) => read_feature_csv(BufReader::new(File::open(path)?))?.1,
        None => {
            let profile = make_subject_profile(a.seed, Archetype::HighWorkload);
            synthetic_dataset(&profile, a.per_class, a.duration, mix_seed(a.seed, 1), &pipeline)?
        }
    };
    if a.shuffle_labels {
        data = shuffled(&data, mix_seed(a.seed, 2))?;
    }
    let grid = if a.no_grid { HyperparameterGrid::fixed(&StackingParams::default()) } else { HyperparameterGrid::default() };
    let config = EvalConfig { iterations: a.iterations, test_fraction: a.test_fraction, grid, seed: a.seed, ..Default::default() };
    let report = evaluate_repeated(&data, &config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &a.model_out {
        let model = fit_stacking(&data, &StackingParams::default(), a.seed)?;
        model.save(out)?;
        eprintln!("model written to {}", out.display());
    }
    Ok(true)
}

fn run(a: RunArgs) -> Result<bool> {
    let config = ServiceConfig {
        data_dir: a.data_dir,
        time_scale: a.time_scale,
        pipeline: a.pipeline.config(),
        model: load_model(a.model.as_deref())?,
        wire_addr: a.wire_addr,
        ..Default::default()
    };
    let spec = SessionSpec {
        subject: a.subject,
        condition: a.condition.into(),
        task: a.task.into(),
        archetype: a.subject_archetype,
        seed: a.seed,
        time_scale: None,
        fixture_dir: a.fixtures,
    };
    let log = runtime()?.block_on(async move {
        let service = SessionService::spawn(config);
        service.run_to_completion(spec).await
    });
    let log = log.map_err(|e| anyhow::anyhow!("{}: {}", e.code, e.message))?;
    print_session(&log);
    Ok(log.check_replay().is_ok())
}

fn print_session(log: &SessionLog) {
    println!("session {} subject {} {} {}", log.header.session_id, log.header.subject, log.header.condition.as_str(), log.header.task.as_str());
    println!("trial,difficulty,source,label,pitch_rmse,roll_rmse,summed");
    for t in &log.trials {
        let label = t.label.map(|l| l.to_string()).unwrap_or_default();
        let (p, r, s) = t.performance.map_or((String::new(), String::new(), String::new()), |s| {
            (format!("{:.6}", s.pitch_rmse), format!("{:.6}", s.roll_rmse), format!("{:.6}", s.summed))
        });
        println!("{},{},{:?},{label},{p},{r},{s}", t.index, t.difficulty.get(), t.source);
    }
    let trace: Vec<String> = log.trials.iter().map(|t| t.difficulty.get().to_string()).collect();
    println!("difficulty trace [{}]; aborted {} failed {}", trace.join(", "), log.aborted, log.failed);
}

fn replay(a: ReplayArgs) -> Result<bool> {
    let mut all_ok = true;
    for path in &a.paths {
        let is_table = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_table {
            let rows = read_replay_table(BufReader::new(File::open(path)?))
                .with_context(|| format!("reading {}", path.display()))?;
            let outcomes = replay_table(&rows)?;
            let failed = outcomes.iter().filter(|o| !o.matches).count();
            for o in &outcomes {
                println!(
                    "{} subject {} {}: logged {:?} replayed {:?} {}",
                    path.display(),
                    o.subject,
                    o.condition.as_str(),
                    o.logged,
                    o.replayed,
                    if o.matches { "ok" } else { "MISMATCH" }
                );
            }
            println!("{}: {}/{} sequences match", path.display(), outcomes.len() - failed, outcomes.len());
            all_ok &= failed == 0;
        } else {
            match load_session(path) {
                Ok(log) => {
                    let trace: Vec<u8> = log.trials.iter().map(|t| t.difficulty.get()).collect();
                    println!("{}: {:?} ok", path.display(), trace);
                }
                Err(e) => {
                    println!("{}: {e}", path.display());
                    all_ok = false;
                }
            }
        }
    }
    Ok(all_ok)
}

fn score(a: ScoreArgs) -> Result<bool> {
    let task: TaskKind = a.task.into();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "file,task,pitch_rmse,roll_rmse,summed")?;
    let mut ok = true;
    for path in &a.telemetry {
        let result = FlightTelemetry::load(path).map_err(anyhow::Error::from).and_then(|t| Ok(score_performance(&t, task)?));
        match result {
            Ok(s) => writeln!(out, "{},{},{:.6},{:.6},{:.6}", path.display(), task.as_str(), s.pitch_rmse, s.roll_rmse, s.summed)?,
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn analyze(a: AnalyzeArgs) -> Result<bool> {
    let mut trials = Vec::new();
    for path in &a.logs {
        let log = load_session(path).with_context(|| format!("loading {}", path.display()))?;
        trials.extend(observations_from_log(&log));
    }
    let mut questionnaires = Vec::new();
    for path in &a.questionnaires {
        questionnaires.extend(
            read_questionnaires(BufReader::new(File::open(path)?)).with_context(|| format!("reading {}", path.display()))?,
        );
    }
    let report = study_report(&trials, &questionnaires);
    let text = report.to_delimited();
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn synth(c: SynthCommand) -> Result<bool> {
    match c {
        SynthCommand::Eeg { state, archetype, subject_seed, seed, duration, out } => {
            let profile = make_subject_profile(subject_seed, archetype);
            gen_eeg_epoch(&profile, state.into(), duration, DEFAULT_SAMPLE_RATE, seed)?.save(&out)?;
        }
        SynthCommand::Telemetry { task, difficulty, subject_seed, seed, out } => {
            let profile = make_subject_profile(subject_seed, Archetype::HighWorkload);
            let level = DifficultyLevel::new(difficulty)?;
            gen_flight_telemetry(task.into(), level, &profile, seed)?.save(&out)?;
        }
        SynthCommand::Features { per_class, subject_seed, seed, out, pipeline } => {
            let profile = make_subject_profile(subject_seed, Archetype::HighWorkload);
            let cfg = pipeline.config();
            let mut rows = Vec::with_capacity(2 * per_class);
            for i in 0..2 * per_class as u64 {
                let label = if i % 2 == 0 { WorkloadLabel::Low } else { WorkloadLabel::High };
                let epoch = gen_eeg_epoch(&profile, label, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE, mix_seed(seed, i))?;
                rows.push((extract_features(&epoch, &cfg)?.features.values().to_vec(), label));
            }
            let keys = canonical_keys(&ChannelMontage::standard());
            write_feature_csv(BufWriter::new(File::create(&out)?), &keys, &rows)?;
        }
        SynthCommand::Session { archetype, subject_seed, seed, out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let profile = make_subject_profile(subject_seed, archetype);
            for index in 1..=neuroflight::adaptation::TRIALS_PER_SESSION {
                let state = profile.latent_state(DifficultyLevel::MEDIUM);
                let epoch: EegEpoch =
                    gen_eeg_epoch(&profile, state, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE, mix_seed(seed, index as u64))?;
                epoch.save(out_dir.join(format!("trial{index}.nfe")))?;
            }
        }
    }
    Ok(true)
}

fn serve(a: ServeArgs) -> Result<bool> {
    let config = ServiceConfig {
        data_dir: a.data_dir,
        time_scale: a.time_scale,
        pipeline: a.pipeline.config(),
        model: load_model(a.model.as_deref())?,
        wire_addr: a.wire_addr,
        ..Default::default()
    };
    runtime()?.block_on(async move {
        let service = SessionService::spawn(config);
        serve_http(service, a.listen).await
    })?;
    Ok(true)
}

fn peer(a: PeerArgs) -> Result<bool> {
    let pipeline = a.pipeline.config();
    let model = match load_model(a.model.as_deref())? {
        Some(m) => m,
        None => {
            eprintln!("training classifier for synthetic subject {}", a.subject_seed);
            let profile = make_subject_profile(a.subject_seed, Archetype::HighWorkload);
            let data = synthetic_dataset(&profile, 12, DEFAULT_DURATION, mix_seed(a.subject_seed, 1), &pipeline)?;
            Arc::new(fit_stacking(&data, &StackingParams::default(), a.subject_seed)?)
        }
    };
    let mut peer = ClassifierPeer::new(model, pipeline);
    if let Some(base) = a.fixture_base {
        peer = peer.with_fixture_base(base);
    }
    let peer = Arc::new(peer);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.listen).await?;
        eprintln!("classifier peer listening on {}", listener.local_addr()?);
        loop {
            let (stream, remote) = listener.accept().await?;
            let peer = peer.clone();
            tokio::spawn(async move {
                let (r, w) = stream.into_split();
                match peer.serve(r, w).await {
                    Ok(stats) => eprintln!("{remote}: closed after {} epochs, {} errors", stats.classified, stats.errors),
                    Err(e) => eprintln!("{remote}: {e}"),
                }
            });
        }
        #[allow(unreachable_code)]
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(true)
}
