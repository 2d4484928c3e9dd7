//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its PASS/FAIL line whether or not it passes.

use std::f64::consts::PI;
use std::io::Cursor;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use neuroflight::adaptation::{Condition, DifficultyLevel, DifficultySource, TaskKind};
use neuroflight::analysis::{fdr_adjust, fisher_z_compare, rm_anova_2x2, SubjectCells};
use neuroflight::classifier::{evaluate_repeated, Dataset, EvalConfig, StackingModel, WorkloadLabel};
use neuroflight::flightperf::{
    detect_changepoints, score_performance, segment_turn, ChangepointConfig, FlightTelemetry,
};
use neuroflight::pipeline::{synthetic_dataset, train_synthetic_model, PipelineConfig};
use neuroflight::session::{
    decode_message, encode_message, load_session, read_replay_table, replay_table, EpochPayload, ErrorCode,
    ServiceConfig, SessionService, SessionSpec, WireBody, WireMessage,
};
use neuroflight::signal::{
    band_power, preprocess, welch_psd, Band, BandSet, ChannelMontage, EegEpoch, PreprocessConfig,
};
use neuroflight::synth::{gen_flight_telemetry, make_subject_profile, Archetype, TelemetryConfig};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lvl(v: i64) -> DifficultyLevel {
    DifficultyLevel::new(v).unwrap()
}

// ---------------------------------------------------------------- replay

const FIXED: &str = include_str!("../fixtures/fixed_order_sessions.csv");
const ADAPTIVE: &str = include_str!("../fixtures/adaptive_sessions.csv");

fn golden_replay() -> Outcome {
    let t0 = Instant::now();
    let mut outcomes = Vec::new();
    for table in [FIXED, ADAPTIVE] {
        let rows = read_replay_table(Cursor::new(table)).map_err(|e| e.to_string())?;
        outcomes.extend(replay_table(&rows).map_err(|e| e.to_string())?);
    }
    let elapsed = t0.elapsed();
    let mismatched: Vec<_> = outcomes.iter().filter(|o| !o.matches).map(|o| o.subject.clone()).collect();
    let trace = |subject: &str| {
        outcomes
            .iter()
            .find(|o| o.subject == subject && o.condition == Condition::Adaptive)
            .map(|o| o.replayed.clone())
    };
    let spot = [("2", [3, 2, 3, 2, 1]), ("1", [3, 4, 5, 5, 5]), ("12", [3, 2, 1, 1, 1])];
    let spot_ok = spot.iter().all(|(s, want)| trace(s).as_deref() == Some(&want[..]));
    ensure(
        mismatched.is_empty() && spot_ok && outcomes.len() == 30 && elapsed < Duration::from_secs(1),
        format!(
            "{} sessions, {} mismatched {:?}, spot traces ok={spot_ok}, {:.1} ms",
            outcomes.len(),
            mismatched.len(),
            mismatched,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

// ---------------------------------------------------------------- fisher z

fn fisher_z() -> Outcome {
    let a = fisher_z_compare(0.56, 75, 0.30, 75).map_err(|e| e.to_string())?.z;
    let b = fisher_z_compare(0.08, 75, 0.09, 75).map_err(|e| e.to_string())?.z;
    ensure(
        (1.92..=1.97).contains(&a) && (-0.08..=-0.04).contains(&b),
        format!("z(.56 vs .30) = {a:.4}, z(.08 vs .09) = {b:.4}"),
    )
}

// ---------------------------------------------------------------- spectral

const FS: f64 = 250.0;

fn tone(freq: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
}

fn spectral() -> Outcome {
    let n = 30_000;
    let psd = welch_psd(&tone(10.0, n), FS).map_err(|e| e.to_string())?;
    let bands = BandSet::default();
    let bp = |b| band_power(&psd, &bands.get(b)).unwrap();
    let (theta, alpha, beta) = (bp(Band::Theta), bp(Band::Alpha), bp(Band::Beta));

    let x = tone(50.0, n);
    let epoch = EegEpoch::new(ChannelMontage::standard(), FS, vec![x.clone(); 32]).map_err(|e| e.to_string())?;
    let y = preprocess(&epoch, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
    let t = FS as usize;
    let power = |s: &[f64]| s[t..n - t].iter().map(|v| v * v).sum::<f64>() / (n - 2 * t) as f64;
    let db = 10.0 * (power(y.channel(0)) / power(&x)).log10();

    ensure(
        (alpha - 0.5).abs() <= 0.025 && theta < 0.01 * alpha && beta < 0.01 * alpha && db <= -40.0,
        format!("alpha {alpha:.4}, theta/alpha {:.2e}, beta/alpha {:.2e}, 50 Hz {db:.1} dB", theta / alpha, beta / alpha),
    )
}

// ---------------------------------------------------------------- classifier

fn shuffled(data: &Dataset, seed: u64) -> Dataset {
    let mut labels = data.labels().to_vec();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    data.with_labels(labels).unwrap()
}

fn classifier() -> Outcome {
    let t0 = Instant::now();
    let profile = make_subject_profile(2024, Archetype::LowWorkload);
    let data = synthetic_dataset(&profile, 100, 120.0, 17, &PipelineConfig::standard()).map_err(|e| e.to_string())?;
    let cfg = EvalConfig { seed: 5, ..EvalConfig::default() };
    let real = evaluate_repeated(&data, &cfg).map_err(|e| e.to_string())?.summary.mean.accuracy;
    let null = evaluate_repeated(&shuffled(&data, 9), &cfg).map_err(|e| e.to_string())?.summary.mean.accuracy;
    let elapsed = t0.elapsed();
    ensure(
        data.len() == 200 && real >= 0.95 && (0.35..=0.65).contains(&null) && elapsed < Duration::from_secs(300),
        format!("{} epochs, accuracy {real:.3}, shuffled {null:.3}, {:.0} s", data.len(), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- closed loop

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn subject_model(seed: u64) -> Result<Arc<StackingModel>, String> {
    let profile = make_subject_profile(seed, Archetype::LowWorkload);
    train_synthetic_model(&profile, 15, seed ^ 0xA11CE, &PipelineConfig::standard())
        .map(Arc::new)
        .map_err(|e| e.to_string())
}

fn adaptive_spec(seed: u64, archetype: Archetype, task: TaskKind) -> SessionSpec {
    SessionSpec {
        subject: format!("s{seed}"),
        condition: Condition::Adaptive,
        task,
        archetype,
        seed,
        time_scale: None,
        fixture_dir: None,
    }
}

fn closed_loop(rt: &tokio::runtime::Runtime) -> Outcome {
    let _ctx = rt.enter();
    let mut converged = 0;
    let mut misses = Vec::new();
    for seed in 101..106u64 {
        let model = subject_model(seed)?;
        for theta in 2..=5i64 {
            let svc = SessionService::spawn(ServiceConfig { model: Some(model.clone()), ..ServiceConfig::default() });
            let spec = adaptive_spec(seed, Archetype::Threshold(lvl(theta)), TaskKind::Deceleration);
            let log = rt.block_on(svc.run_to_completion(spec)).map_err(|e| e.to_string())?;
            let trace: Vec<i64> = log.trials.iter().map(|t| t.difficulty.get() as i64).collect();
            if trace.len() == 5 && trace[2..].iter().all(|&d| d == theta || d == theta - 1) {
                converged += 1;
            } else {
                misses.push(format!("seed {seed} θ={theta} {trace:?}"));
            }
        }
    }
    ensure(converged >= 18, format!("{converged}/20 runs settle at θ or θ-1 from trial 3 {misses:?}"))
}

// ---------------------------------------------------------------- oracles

/// 2×2 within-subject effects reduce to one-sample tests on per-subject
/// contrasts: SS_effect = n·c̄², SS_error = Σ(c - c̄)².
fn contrast_ss(cells: &[[[f64; 2]; 2]], weights: [[f64; 2]; 2]) -> (f64, f64) {
    let c: Vec<f64> = cells
        .iter()
        .map(|y| 0.5 * (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| weights[a][b] * y[a][b]).sum::<f64>())
        .collect();
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    (n * mean * mean, c.iter().map(|v| (v - mean).powi(2)).sum())
}

fn paired_t(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    mean / (sd / n.sqrt())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn anova_oracle(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let effects = [
        ("condition", [[1.0, 1.0], [-1.0, -1.0]]),
        ("task", [[1.0, -1.0], [1.0, -1.0]]),
        ("interaction", [[1.0, -1.0], [-1.0, 1.0]]),
    ];
    for set in 0..3 {
        let cells: Vec<[[f64; 2]; 2]> =
            (0..4).map(|_| [[0, 1], [0, 1]].map(|r| r.map(|_| rng.random_range(-10.0..10.0)))).collect();
        let data: Vec<SubjectCells> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| SubjectCells { subject: format!("p{i}"), cells: c.map(|r| r.map(Some)) })
            .collect();
        let table = rm_anova_2x2(&data).map_err(|e| e.to_string())?;
        for ((name, w), got) in effects.iter().zip([table.condition, table.task, table.interaction]) {
            let (ss, err) = contrast_ss(&cells, *w);
            if !close(got.ss_effect, ss, 1e-9) || !close(got.ss_error, err, 1e-9) {
                return Err(format!("set {set} {name}: SS {} / {} vs oracle {ss} / {err}", got.ss_effect, got.ss_error));
            }
        }

        let x: Vec<f64> = cells.iter().map(|c| c[0][0]).collect();
        let y: Vec<f64> = cells.iter().map(|c| c[1][0]).collect();
        let reduced: Vec<SubjectCells> = x
            .iter()
            .zip(&y)
            .enumerate()
            .map(|(i, (a, b))| SubjectCells { subject: format!("p{i}"), cells: [[Some(*a); 2], [Some(*b); 2]] })
            .collect();
        let f = rm_anova_2x2(&reduced).map_err(|e| e.to_string())?.condition.f;
        let t = paired_t(&x, &y);
        if !close(f, t * t, 1e-9) {
            return Err(format!("set {set}: F {f} vs t² {}", t * t));
        }
    }
    Ok(())
}

fn segment_sse(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum()
}

/// Exhaustive search over every segmentation with at most two changes.
fn brute_changepoints(x: &[f64], min_seg: usize, penalty: f64) -> (Vec<usize>, f64) {
    let n = x.len();
    let mut best = (vec![], segment_sse(x));
    let eps = 1e-10 * best.1 + 1e-300;
    let mut best1 = (vec![], f64::INFINITY);
    for i in min_seg..=n - min_seg {
        let c = segment_sse(&x[..i]) + segment_sse(&x[i..]);
        if c < best1.1 {
            best1 = (vec![i], c);
        }
    }
    let mut best2 = (vec![], f64::INFINITY);
    for i in min_seg..=n.saturating_sub(2 * min_seg) {
        for j in i + min_seg..=n - min_seg {
            let c = segment_sse(&x[..i]) + segment_sse(&x[i..j]) + segment_sse(&x[j..]);
            if c < best2.1 {
                best2 = (vec![i, j], c);
            }
        }
    }
    for (k, cand) in [(1.0, best1), (2.0, best2)] {
        let v = cand.1 + k * penalty;
        if v < best.1 - eps {
            best = (cand.0, v);
        }
    }
    best
}

fn penalized_cost(x: &[f64], cps: &[usize], penalty: f64) -> f64 {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cps);
    bounds.push(x.len());
    bounds.windows(2).map(|w| segment_sse(&x[w[0]..w[1]])).sum::<f64>() + cps.len() as f64 * penalty
}

fn changepoint_oracle(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..100 {
        let n = rng.random_range(12..=200usize);
        let min_seg = rng.random_range(1..=(n / 6).clamp(1, 10));
        let sigma = rng.random_range(0.2..2.0);
        let changes = rng.random_range(0..=2usize);
        let mut level = 0.0;
        let mut breaks: Vec<usize> = (0..changes).map(|_| rng.random_range(1..n)).collect();
        breaks.sort_unstable();
        let noise = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..n)
            .map(|i| {
                if breaks.contains(&i) {
                    level += rng.random_range(-6.0..6.0);
                }
                level + noise.sample(rng)
            })
            .collect();
        let penalty = 2.0 * sigma * sigma * (n as f64).ln();
        let cfg = ChangepointConfig { max_changes: 2, min_segment: min_seg, penalty: Some(penalty) };
        let got = detect_changepoints(&x, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let (want, want_cost) = brute_changepoints(&x, min_seg, penalty);
        if got != want && !close(penalized_cost(&x, &got, penalty), want_cost, 1e-9) {
            return Err(format!("case {case} (n={n}, min {min_seg}): {got:?} vs exhaustive {want:?}"));
        }
    }
    Ok(())
}

/// Step-up adjustment straight from its definition:
/// q_(k) = min over j ≥ k of min(1, m·p_(j)/j).
fn brute_fdr(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    p.iter()
        .map(|&pi| {
            let k = sorted.iter().position(|&s| s == pi).unwrap();
            (k..m).map(|j| (m as f64 * sorted[j] / (j + 1) as f64).min(1.0)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn fdr_oracle(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..50 {
        let m = rng.random_range(1..=40usize);
        let coarse = case % 3 == 0;
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let v: f64 = rng.random_range(0.0..=1.0);
                if coarse {
                    (v * 20.0).round() / 20.0
                } else {
                    v.powi(3)
                }
            })
            .collect();
        let got = fdr_adjust(&p).map_err(|e| e.to_string())?;
        let want = brute_fdr(&p);
        if got.iter().zip(&want).any(|(a, b)| !close(*a, *b, 1e-12)) {
            return Err(format!("case {case}: {got:?} vs {want:?}"));
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0DAC1E);
    let results = [
        ("anova", anova_oracle(&mut rng)),
        ("changepoints", changepoint_oracle(&mut rng)),
        ("fdr", fdr_oracle(&mut rng)),
    ];
    let failed: Vec<String> =
        results.iter().filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}"))).collect();
    ensure(
        failed.is_empty(),
        if failed.is_empty() {
            "3 ANOVA sets with F = t², 100 changepoint cases, 50 FDR vectors".into()
        } else {
            failed.join("; ")
        },
    )
}

// ---------------------------------------------------------------- performance

fn offset(t: &FlightTelemetry, pitch: f64, roll: f64) -> FlightTelemetry {
    FlightTelemetry::new(
        t.sample_rate(),
        t.pitch().iter().map(|v| v + pitch).collect(),
        t.roll().iter().map(|v| v + roll).collect(),
        t.airspeed().to_vec(),
        t.altitude().to_vec(),
    )
    .unwrap()
}

fn performance_metric() -> Outcome {
    let perfect = make_subject_profile(31, Archetype::LowWorkload).with_skill(0.0);
    let mut worst_zero = 0.0f64;
    let mut worst_offset = 0.0f64;
    for task in [TaskKind::Deceleration, TaskKind::MediumTurn] {
        for level in DifficultyLevel::all() {
            let t = gen_flight_telemetry(task, level, &perfect, level.get() as u64).map_err(|e| e.to_string())?;
            let zero = score_performance(&t, task).map_err(|e| e.to_string())?.summed;
            let shifted = score_performance(&offset(&t, 2.0, 1.0), task).map_err(|e| e.to_string())?.summed;
            worst_zero = worst_zero.max(zero.abs());
            worst_offset = worst_offset.max((shifted - 3.0).abs());
        }
    }

    let cfg = TelemetryConfig::default();
    let (start, end) = cfg.turn_bounds();
    let noise = Normal::new(0.0, 30.0 / 10.0).unwrap();
    let mut worst_seg = 0usize;
    for seed in 0..20u64 {
        let t = gen_flight_telemetry(TaskKind::MediumTurn, lvl(3), &perfect, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roll: Vec<f64> = t.roll().iter().map(|v| v + noise.sample(&mut rng)).collect();
        let (s, e) = segment_turn(&roll, t.sample_rate()).map_err(|e| e.to_string())?;
        worst_seg = worst_seg.max(s.abs_diff(start)).max(e.abs_diff(end));
    }

    ensure(
        worst_zero <= 1e-12 && worst_offset <= 1e-12 && worst_seg <= 5,
        format!(
            "skill-0 max score {worst_zero:.1e}, offset score error {worst_offset:.1e}, turn bounds within {worst_seg} samples"
        ),
    )
}

// ---------------------------------------------------------------- protocol

const ALPHABET: &[char] = &['a', 'Z', '7', ' ', '"', '\\', '/', '\t', '\u{1}', 'é', '✈', '𝄞', '{', ','];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(0..24)).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn random_finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = f64::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

fn random_label(rng: &mut ChaCha8Rng) -> WorkloadLabel {
    if rng.random() {
        WorkloadLabel::High
    } else {
        WorkloadLabel::Low
    }
}

fn random_payload(rng: &mut ChaCha8Rng) -> EpochPayload {
    if rng.random_bool(0.3) {
        return EpochPayload::Fixture { path: random_text(rng) };
    }
    let n = rng.random_range(1..8);
    let rows = (0..32).map(|_| (0..n).map(|_| random_finite(rng)).collect()).collect();
    let rate = rng.random_range(1.0..2000.0);
    EpochPayload::inline(&EegEpoch::new(ChannelMontage::standard(), rate, rows).unwrap()).unwrap()
}

fn random_body(rng: &mut ChaCha8Rng) -> WireBody {
    let trial = rng.random_range(1..=5);
    let attempt = rng.random_range(0..4);
    match rng.random_range(0..6) {
        0 => WireBody::StartTrial {
            session: random_text(rng),
            trial,
            condition: if rng.random() { Condition::Adaptive } else { Condition::FixedOrder },
            task: if rng.random() { TaskKind::MediumTurn } else { TaskKind::Deceleration },
            difficulty: lvl(rng.random_range(1..=5)),
        },
        1 => WireBody::EpochData { trial, attempt, payload: random_payload(rng) },
        2 => WireBody::Classification { trial, attempt, label: random_label(rng) },
        3 => WireBody::SetDifficulty {
            next_trial: trial,
            level: lvl(rng.random_range(1..=5)),
            source: if rng.random() { DifficultySource::Rule } else { DifficultySource::Override },
        },
        4 => WireBody::TrialEnd { trial },
        _ => WireBody::Error {
            code: *[ErrorCode::Protocol, ErrorCode::Decode, ErrorCode::Epoch, ErrorCode::Internal].choose(rng).unwrap(),
            detail: random_text(rng),
            trial: rng.random_bool(0.5).then_some(trial),
            attempt,
        },
    }
}

fn wire_round_trip() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for i in 0..1000u64 {
        let msg = WireMessage::new(rng.random_range(0..u64::MAX / 2).wrapping_add(i), random_body(&mut rng));
        let frame = encode_message(&msg);
        if frame.iter().filter(|b| **b == b'\n').count() != 1 {
            return Err(format!("message {i}: frame is not a single line"));
        }
        let back = decode_message(&frame).map_err(|e| format!("message {i}: {e}"))?;
        if back != msg || encode_message(&back) != frame {
            return Err(format!("message {i} changed in transit"));
        }
        if let WireBody::EpochData { payload: p @ EpochPayload::Inline { .. }, .. } = &msg.body {
            let WireBody::EpochData { payload: q, .. } = &back.body else { unreachable!() };
            let bits = |e: EegEpoch| e.into_samples().concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            if bits(p.to_epoch(None).unwrap()) != bits(q.to_epoch(None).unwrap()) {
                return Err(format!("message {i}: epoch samples differ"));
            }
        }
    }
    Ok(())
}

fn protocol(rt: &tokio::runtime::Runtime) -> Outcome {
    wire_round_trip()?;
    let _ctx = rt.enter();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = subject_model(77)?;
    let svc = SessionService::spawn(ServiceConfig {
        model: Some(model),
        data_dir: Some(dir.path().into()),
        ..ServiceConfig::default()
    });
    let spec = adaptive_spec(77, Archetype::Threshold(DifficultyLevel::MEDIUM), TaskKind::MediumTurn);
    let t0 = Instant::now();
    let log = rt.block_on(svc.run_to_completion(spec)).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let path = rt
        .block_on(svc.snapshot())
        .ok_or("no snapshot")?
        .log_path
        .ok_or("session log not written")?;
    let loaded = load_session(&path).map_err(|e| e.to_string())?;
    let replay_ok = loaded.check_replay().is_ok() && loaded == log;
    ensure(
        log.trials.len() == 5 && replay_ok && elapsed < Duration::from_secs(60),
        format!(
            "1000 frames round-trip, loopback session {:?} in {:.1} s, log replay ok={replay_ok}",
            log.trials.iter().map(|t| t.difficulty.get()).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let rt = runtime();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("golden replay", Box::new(golden_replay)),
        ("fisher z comparison", Box::new(fisher_z)),
        ("spectral accuracy", Box::new(spectral)),
        ("classifier accuracy", Box::new(classifier)),
        ("closed-loop convergence", Box::new(|| closed_loop(&rt))),
        ("statistics oracles", Box::new(oracle_equivalence)),
        ("performance metric", Box::new(performance_metric)),
        ("wire protocol and loopback", Box::new(|| protocol(&rt))),
    ];
    let filter: Vec<&String> = args.iter().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let (status, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
            Ok(Ok(d)) => ("PASS", d),
            Ok(Err(d)) => ("FAIL", d),
            Err(p) => {
                let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                ("FAIL", format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("{status} [{}] {name}: {detail} ({:.1} s)", i + 1, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
