//! Training data for the surrogate.
//!
//! The movements log is replayed into a piecewise-constant actuation
//! timeline, cut into maximal ON and OFF runs, and each run's AIT trace is
//! expanded into every two-point sample up to five hours apart.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::{Direction, TemperatureTrace};
use crate::plant::{ActuatorMode, Disturbances};
use crate::telemetry::{AitRecord, MpcMovement, SENSOR_PERIOD_MIN};
use crate::time::{SimTime, MINUTES_PER_DAY};

pub const FEATURE_NAMES: [&str; 8] = [
    "t_init", "delta_t", "i_ahu", "t_out", "h_out", "w_speed", "s_rad", "s_energy",
];

/// Longest pair spacing used for expansion, minutes.
pub const MAX_PAIR_SPACING: i64 = 300;

/// Weather and occupancy at any instant.
pub trait DisturbanceSource {
    fn at(&self, t: SimTime) -> Disturbances;
}

/// Constant conditions.
impl DisturbanceSource for Disturbances {
    fn at(&self, _t: SimTime) -> Disturbances {
        *self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub start: SimTime,
    pub end: SimTime,
    pub direction: Direction,
    /// AIT on the 5-minute grid; timestamps are minutes since the epoch.
    pub ait_trace: TemperatureTrace,
    /// Time-averaged actuation level over the session.
    pub mean_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub t_init: f64,
    pub delta_t: f64,
    pub i_ahu: f64,
    pub t_out: f64,
    pub h_out: f64,
    pub w_speed: f64,
    pub s_rad: f64,
    pub s_energy: f64,
    /// AIT change over `delta_t`.
    pub target: f64,
}

impl TrainingSample {
    pub fn inputs(&self) -> [f64; 8] {
        [
            self.t_init,
            self.delta_t,
            self.i_ahu,
            self.t_out,
            self.h_out,
            self.w_speed,
            self.s_rad,
            self.s_energy,
        ]
    }

    pub fn from_inputs(x: [f64; 8], target: f64) -> Self {
        TrainingSample {
            t_init: x[0],
            delta_t: x[1],
            i_ahu: x[2],
            t_out: x[3],
            h_out: x[4],
            w_speed: x[5],
            s_rad: x[6],
            s_energy: x[7],
            target,
        }
    }
}

/// Constant actuation over `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationSpan {
    pub from: SimTime,
    pub to: SimTime,
    pub level: f64,
}

impl ActuationSpan {
    pub fn is_on(&self) -> bool {
        self.level > 0.0
    }
}

/// Replays movements into actuation spans. A relay runs at full gain for
/// `on_minutes` and is off for the rest of the interval; a variable-speed
/// drive holds `u` for the whole interval. Adjacent spans with equal level
/// are merged.
pub fn actuation_timeline(movements: &[MpcMovement], mode: ActuatorMode, sampling: i64) -> Vec<ActuationSpan> {
    let mut spans: Vec<ActuationSpan> = Vec::new();
    let mut push = |from: SimTime, to: SimTime, level: f64| {
        if to <= from {
            return;
        }
        if let Some(last) = spans.last_mut() {
            if last.to == from && last.level == level {
                last.to = to;
                return;
            }
        }
        spans.push(ActuationSpan { from, to, level });
    };
    for m in movements {
        let end = m.date + sampling;
        match mode {
            ActuatorMode::Binary => {
                let on = (m.on_minutes.round() as i64).clamp(0, sampling);
                push(m.date, m.date + on, 1.0);
                push(m.date + on, end, 0.0);
            }
            ActuatorMode::Analog => push(m.date, end, m.u.clamp(0.0, 1.0)),
        }
    }
    spans
}

/// Maximal ON and OFF runs of the actuation timeline, each sampled on the
/// 5-minute AIT grid with both ends included. Runs are split where the AIT
/// log has holes; pieces with fewer than two points are dropped.
pub fn extract_sessions(
    movements: &[MpcMovement],
    ait_log: &[AitRecord],
    mode: ActuatorMode,
    sampling: i64,
) -> Vec<Session> {
    let spans = actuation_timeline(movements, mode, sampling);
    let ait: std::collections::BTreeMap<SimTime, f64> = ait_log.iter().map(|r| (r.timestamp, r.ait)).collect();

    let mut sessions = Vec::new();
    let mut i = 0;
    while i < spans.len() {
        let on = spans[i].is_on();
        let mut j = i;
        while j + 1 < spans.len() && spans[j + 1].is_on() == on && spans[j + 1].from == spans[j].to {
            j += 1;
        }
        let run = &spans[i..=j];
        let (from, to) = (run[0].from, run[run.len() - 1].to);

        let first = SimTime(from.minutes().div_euclid(SENSOR_PERIOD_MIN) * SENSOR_PERIOD_MIN);
        let first = if first < from { first + SENSOR_PERIOD_MIN } else { first };
        let mut piece: Vec<(SimTime, f64)> = Vec::new();
        let mut t = first;
        while t <= to {
            match ait.get(&t) {
                Some(&y) => piece.push((t, y)),
                None => flush(&mut piece, run, on, &mut sessions),
            }
            t = t + SENSOR_PERIOD_MIN;
        }
        flush(&mut piece, run, on, &mut sessions);
        i = j + 1;
    }
    sessions
}

fn flush(piece: &mut Vec<(SimTime, f64)>, run: &[ActuationSpan], on: bool, out: &mut Vec<Session>) {
    if piece.len() >= 2 {
        let start = piece[0].0;
        let end = piece[piece.len() - 1].0;
        let samples = piece.iter().map(|&(t, y)| (t.minutes() as f64, y)).collect();
        let trace = TemperatureTrace::from_samples(samples).expect("grid points are uniform");
        out.push(Session {
            start,
            end,
            direction: if on {
                Direction::Increasing
            } else {
                Direction::Decreasing
            },
            ait_trace: trace,
            mean_gain: mean_level(run, start, end),
        });
    }
    piece.clear();
}

/// Time-weighted actuation level over `[from, to]`.
fn mean_level(spans: &[ActuationSpan], from: SimTime, to: SimTime) -> f64 {
    let total = (to - from) as f64;
    if total <= 0.0 {
        return 0.0;
    }
    spans
        .iter()
        .map(|s| {
            let overlap = (s.to.min(to) - s.from.max(from)).max(0) as f64;
            s.level * overlap
        })
        .sum::<f64>()
        / total
}

/// Every pair `i < j` of session points at most `max_spacing` minutes apart,
/// with disturbances taken at the earlier point. `spans` supplies the
/// actuation level; pass the session's own timeline.
pub fn expand_pairs(
    session: &Session,
    spans: &[ActuationSpan],
    source: &dyn DisturbanceSource,
    max_spacing: i64,
) -> Vec<TrainingSample> {
    let pts = session.ait_trace.samples();
    let mut out = Vec::new();
    for (i, &(ti, yi)) in pts.iter().enumerate() {
        let t_i = SimTime(ti.round() as i64);
        let dist = source.at(t_i);
        for &(tj, yj) in &pts[i + 1..] {
            let t_j = SimTime(tj.round() as i64);
            let dt = t_j - t_i;
            if dt > max_spacing {
                break;
            }
            let level = if spans.is_empty() {
                session.mean_gain
            } else {
                mean_level(spans, t_i, t_j)
            };
            out.push(TrainingSample {
                t_init: yi,
                delta_t: dt as f64,
                i_ahu: level,
                t_out: dist.t_out,
                h_out: dist.h_out,
                w_speed: dist.w_speed,
                s_rad: dist.s_rad,
                s_energy: dist.s_energy,
                target: yj - yi,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Trailing window length, days, ending with the window's last day.
    pub window_days: i64,
    pub max_pair_spacing: i64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            window_days: 60,
            max_pair_spacing: MAX_PAIR_SPACING,
            train_fraction: 0.7,
            val_fraction: 0.15,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_days < 1 {
            return Err(Error::Config("dataset.window_days must be >= 1".into()));
        }
        if self.max_pair_spacing < SENSOR_PERIOD_MIN {
            return Err(Error::Config("dataset.max_pair_spacing must be >= 5".into()));
        }
        let (a, b) = (self.train_fraction, self.val_fraction);
        if !(a > 0.0 && b >= 0.0 && a + b <= 1.0) {
            return Err(Error::Config(
                "dataset split fractions must be positive and sum to <= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<TrainingSample>,
    pub val: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
}

impl SplitDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffles with a seeded RNG and splits by the configured fractions;
/// the test split takes the remainder.
pub fn split(mut samples: Vec<TrainingSample>, config: &DatasetConfig, seed: u64) -> SplitDataset {
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = samples.len();
    let n_train = (config.train_fraction * n as f64).floor() as usize;
    let n_val = (config.val_fraction * n as f64).floor() as usize;
    let test = samples.split_off(n_train + n_val);
    let val = samples.split_off(n_train);
    SplitDataset {
        train: samples,
        val,
        test,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyDatasets {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub increasing: SplitDataset,
    pub decreasing: SplitDataset,
}

impl DailyDatasets {
    pub fn get(&self, direction: Direction) -> &SplitDataset {
        match direction {
            Direction::Increasing => &self.increasing,
            Direction::Decreasing => &self.decreasing,
        }
    }
}

/// Logs the nightly build draws from.
#[derive(Debug, Clone, Copy)]
pub struct Logs<'a> {
    pub movements: &'a [MpcMovement],
    pub ait: &'a [AitRecord],
    pub mode: ActuatorMode,
    /// Control interval, minutes.
    pub sampling: i64,
}

/// Both direction datasets from the trailing window ending with
/// `window_end_day` (inclusive).
pub fn build_daily(
    window_end_day: NaiveDate,
    logs: Logs<'_>,
    source: &dyn DisturbanceSource,
    config: &DatasetConfig,
    seed: u64,
) -> Result<DailyDatasets> {
    config.validate()?;
    let end = SimTime::from_date(window_end_day) + MINUTES_PER_DAY;
    let start = end - config.window_days * MINUTES_PER_DAY;
    let movements: Vec<MpcMovement> = logs
        .movements
        .iter()
        .filter(|m| m.date >= start && m.date < end)
        .cloned()
        .collect();
    if movements.is_empty() {
        return Err(Error::EmptyWindow(format!("no movements between {start} and {end}")));
    }
    let ait: Vec<AitRecord> = logs
        .ait
        .iter()
        .filter(|r| r.timestamp >= start && r.timestamp <= end)
        .cloned()
        .collect();

    let spans = actuation_timeline(&movements, logs.mode, logs.sampling);
    let mut inc = Vec::new();
    let mut dec = Vec::new();
    for s in extract_sessions(&movements, &ait, logs.mode, logs.sampling) {
        let samples = expand_pairs(&s, &spans, source, config.max_pair_spacing);
        match s.direction {
            Direction::Increasing => inc.extend(samples),
            Direction::Decreasing => dec.extend(samples),
        }
    }
    Ok(DailyDatasets {
        window_start: start.date(),
        window_end: window_end_day,
        increasing: split(inc, config, crate::plant::weather::mix(seed, 1)),
        decreasing: split(dec, config, crate::plant::weather::mix(seed, 2)),
    })
}

pub fn write_samples(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<Vec<TrainingSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}
