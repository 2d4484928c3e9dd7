use std::io::{self, BufRead, Write};
use std::path::Path;

use super::FlightPerfError;

pub const MAX_TELEMETRY_RATE: f64 = 500.0;

const HEADER: &str = "time,pitch,roll,airspeed,altitude";
const MAGIC: &str = "# neuroflight-telemetry v1";

/// Uniformly sampled aircraft state. Angles in degrees, airspeed in knots,
/// altitude in feet.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightTelemetry {
    sample_rate: f64,
    pitch: Vec<f64>,
    roll: Vec<f64>,
    airspeed: Vec<f64>,
    altitude: Vec<f64>,
}

impl FlightTelemetry {
    pub fn new(
        sample_rate: f64,
        pitch: Vec<f64>,
        roll: Vec<f64>,
        airspeed: Vec<f64>,
        altitude: Vec<f64>,
    ) -> Result<Self, FlightPerfError> {
        if !(sample_rate > 0.0 && sample_rate <= MAX_TELEMETRY_RATE) {
            return Err(FlightPerfError::Config(format!(
                "telemetry rate {sample_rate} Hz outside (0, {MAX_TELEMETRY_RATE}]"
            )));
        }
        let n = pitch.len();
        if n == 0 || roll.len() != n || airspeed.len() != n || altitude.len() != n {
            return Err(FlightPerfError::Shape(format!(
                "channel lengths pitch={n} roll={} airspeed={} altitude={}",
                roll.len(),
                airspeed.len(),
                altitude.len()
            )));
        }
        for (name, s) in [("pitch", &pitch), ("roll", &roll), ("airspeed", &airspeed), ("altitude", &altitude)] {
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(FlightPerfError::Shape(format!("non-finite {name} at sample {i}")));
            }
        }
        Ok(Self { sample_rate, pitch, roll, airspeed, altitude })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate
    }

    pub fn pitch(&self) -> &[f64] {
        &self.pitch
    }

    pub fn roll(&self) -> &[f64] {
        &self.roll
    }

    pub fn airspeed(&self) -> &[f64] {
        &self.airspeed
    }

    pub fn altitude(&self) -> &[f64] {
        &self.altitude
    }

    /// Comma-separated text with a magic comment carrying the sample rate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{MAGIC} sample_rate={}", self.sample_rate)?;
        writeln!(w, "{HEADER}")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.time(i),
                self.pitch[i],
                self.roll[i],
                self.airspeed[i],
                self.altitude[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FlightPerfError> {
        let mut lines = r.lines().enumerate();
        let bad = |line: usize, msg: String| FlightPerfError::Format { line: line + 1, message: msg };

        let (_, first) = lines.next().ok_or_else(|| bad(0, "empty file".into()))?;
        let first = first?;
        let rate = first
            .strip_prefix(MAGIC)
            .and_then(|rest| rest.trim().strip_prefix("sample_rate="))
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| bad(0, "missing telemetry magic line".into()))?;

        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        if header?.trim() != HEADER {
            return Err(bad(1, format!("expected header {HEADER:?}")));
        }

        let (mut p, mut r, mut a, mut h) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(ln, e.to_string()))?;
            if vals.len() != 5 {
                return Err(bad(ln, format!("expected 5 fields, found {}", vals.len())));
            }
            p.push(vals[1]);
            r.push(vals[2]);
            a.push(vals[3]);
            h.push(vals[4]);
        }
        Self::new(rate, p, r, a, h)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FlightPerfError> {
        let f = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FlightPerfError> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(io::BufReader::new(f))
    }
}
