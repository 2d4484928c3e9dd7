use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SubjectProfile, SynthError};
use crate::adaptation::{DifficultyLevel, TaskKind};
use crate::flightperf::{FlightTelemetry, TURN_ROLL_DEG};

/// Deviation noise multiplier per difficulty level (index 0 is level 1).
pub const LEVEL_NOISE_SCALE: [f64; 5] = [1.0, 1.3, 1.7, 2.2, 2.8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryConfig {
    pub sample_rate: f64,
    pub duration: f64,
    /// Autoregressive coefficient of the deviation process.
    pub ar_coefficient: f64,
    /// Innovation standard deviation at level 1 for skill 1, degrees.
    pub innovation_deg: f64,
    pub turn_start_s: f64,
    pub turn_end_s: f64,
    pub decel_ramp_s: f64,
    pub altitude_ft: f64,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self {
            sample_rate: 100.0,
            duration: 120.0,
            ar_coefficient: 0.99,
            innovation_deg: 0.05,
            turn_start_s: 10.0,
            turn_end_s: 90.0,
            decel_ramp_s: 60.0,
            altitude_ft: 3000.0,
        }
    }
}

impl TelemetryConfig {
    /// Sample indices bounding the banked segment of a medium turn.
    pub fn turn_bounds(&self) -> (usize, usize) {
        (
            (self.turn_start_s * self.sample_rate).round() as usize,
            (self.turn_end_s * self.sample_rate).round() as usize,
        )
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = phi * x + sd * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

pub fn gen_flight_telemetry(
    task: TaskKind,
    difficulty: DifficultyLevel,
    profile: &SubjectProfile,
    trial_seed: u64,
) -> Result<FlightTelemetry, SynthError> {
    gen_flight_telemetry_with(&TelemetryConfig::default(), task, difficulty, profile, trial_seed)
}

pub fn gen_flight_telemetry_with(
    config: &TelemetryConfig,
    task: TaskKind,
    difficulty: DifficultyLevel,
    profile: &SubjectProfile,
    trial_seed: u64,
) -> Result<FlightTelemetry, SynthError> {
    if !(config.ar_coefficient.abs() < 1.0) || !(config.innovation_deg >= 0.0) {
        return Err(SynthError::Config("invalid deviation process".into()));
    }
    let n = config.n_samples();
    let (start, end) = config.turn_bounds();
    if task == TaskKind::MediumTurn && !(start < end && end < n) {
        return Err(SynthError::Config(format!("turn [{start}, {end}) does not fit {n} samples")));
    }
    let sd = config.innovation_deg * profile.skill * LEVEL_NOISE_SCALE[difficulty.get() as usize - 1];
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(profile.seed, trial_seed), 0xF11E));
    let phi = config.ar_coefficient;
    let pitch = ar1(&mut rng, n, phi, sd);
    let roll_dev = ar1(&mut rng, n, phi, sd);
    let speed_dev = ar1(&mut rng, n, phi, 4.0 * sd);
    let alt_dev = ar1(&mut rng, n, phi, 20.0 * sd);

    let roll: Vec<f64> = roll_dev
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let target = match task {
                TaskKind::MediumTurn if (start..end).contains(&i) => TURN_ROLL_DEG,
                _ => 0.0,
            };
            target + d
        })
        .collect();
    let airspeed: Vec<f64> = speed_dev
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let t = i as f64 / config.sample_rate;
            let target = match task {
                TaskKind::Deceleration => 180.0 - 70.0 * (t / config.decel_ramp_s).min(1.0),
                TaskKind::MediumTurn => 150.0,
            };
            target + d
        })
        .collect();
    let altitude: Vec<f64> = alt_dev.iter().map(|d| config.altitude_ft + d).collect();
    Ok(FlightTelemetry::new(config.sample_rate, pitch, roll, airspeed, altitude)?)
}
