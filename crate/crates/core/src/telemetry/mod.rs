//! Sensor emulation, AIT aggregation, connectivity tracking and the two
//! append-only stores (sensor readings and MPC movements).

pub mod bus;
pub mod store;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::weather::mix;
use crate::plant::{PlantState, ZONES};
use crate::time::SimTime;

pub use bus::{AitAggregator, MessageBus, Subscription};
pub use store::{JsonlStore, Timestamped};

/// Sensor reporting period, minutes.
pub const SENSOR_PERIOD_MIN: i64 = 5;

pub const SENSORS_TOPIC: &str = "sensors";

/// One sensor node message, exactly as sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: u8,
    pub temperature: f64,
    pub humidity: f64,
    pub date: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AitRecord {
    pub timestamp: SimTime,
    pub ait: f64,
    pub humidity_avg: f64,
    pub reporting_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mpc,
    Manual,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Manual => "manual",
        }
    }
}

/// One control decision as logged in the movements store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcMovement {
    pub date: SimTime,
    pub ait: f64,
    pub setpoint: f64,
    pub u: f64,
    pub on_minutes: f64,
    pub controller: ControllerKind,
}

impl Timestamped for SensorReading {
    fn timestamp(&self) -> SimTime {
        self.date
    }
}

impl Timestamped for AitRecord {
    fn timestamp(&self) -> SimTime {
        self.timestamp
    }
}

impl Timestamped for MpcMovement {
    fn timestamp(&self) -> SimTime {
        self.date
    }
}

/// A scripted outage of one node over `[from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropout {
    pub sensor_id: u8,
    pub from: SimTime,
    pub to: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Half-width of the uniform temperature error, °C.
    pub temp_noise: f64,
    /// Temperature resolution, °C; 0 disables quantization.
    pub temp_quantum: f64,
    /// Half-width of the uniform humidity error, %RH.
    pub humidity_noise: f64,
    pub humidity_quantum: f64,
    pub dropouts: Vec<Dropout>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            temp_noise: 2.0,
            temp_quantum: 1.0,
            humidity_noise: 5.0,
            humidity_quantum: 1.0,
            dropouts: Vec::new(),
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        SensorConfig {
            temp_noise: 0.0,
            temp_quantum: 0.0,
            humidity_noise: 0.0,
            humidity_quantum: 0.0,
            dropouts: Vec::new(),
        }
    }

    fn is_dropped(&self, sensor_id: u8, t: SimTime) -> bool {
        self.dropouts
            .iter()
            .any(|d| d.sensor_id == sensor_id && d.from <= t && t <= d.to)
    }
}

fn quantize(v: f64, quantum: f64) -> f64 {
    if quantum > 0.0 {
        (v / quantum).round() * quantum
    } else {
        v
    }
}

/// Readings of every node that is not scripted to be silent at `timestamp`.
pub fn sample_sensors(
    state: &PlantState,
    timestamp: SimTime,
    seed: u64,
    config: &SensorConfig,
) -> Result<Vec<SensorReading>> {
    if !timestamp.is_aligned(SENSOR_PERIOD_MIN) {
        return Err(Error::InvalidArgument(format!(
            "{timestamp} is not on the {SENSOR_PERIOD_MIN}-minute grid"
        )));
    }
    state.validate()?;
    let mut out = Vec::with_capacity(ZONES);
    for (i, &zone_temp) in state.zone_temps.iter().enumerate() {
        let sensor_id = (i + 1) as u8;
        if config.is_dropped(sensor_id, timestamp) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, timestamp.minutes() as u64), u64::from(sensor_id)));
        let mut noise = |half: f64| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let temperature = quantize(zone_temp + noise(config.temp_noise), config.temp_quantum);
        let humidity = quantize(
            (state.indoor_humidity + noise(config.humidity_noise)).clamp(0.0, 100.0),
            config.humidity_quantum,
        );
        out.push(SensorReading {
            sensor_id,
            temperature,
            humidity,
            date: timestamp,
        });
    }
    Ok(out)
}

/// Mean over the reporting nodes of one 5-minute window. Duplicate deliveries
/// of the same node are counted once.
pub fn aggregate_ait(readings: &[SensorReading]) -> Result<AitRecord> {
    let Some(first) = readings.first() else {
        return Err(Error::EmptyWindow("no sensor readings".into()));
    };
    let timestamp = first.date;
    if readings.iter().any(|r| r.date != timestamp) {
        return Err(Error::InvalidArgument("readings span more than one window".into()));
    }
    let mut sorted: Vec<&SensorReading> = readings.iter().collect();
    sorted.sort_by_key(|r| r.sensor_id);
    sorted.dedup_by_key(|r| r.sensor_id);
    let n = sorted.len() as f64;
    Ok(AitRecord {
        timestamp,
        ait: sorted.iter().map(|r| r.temperature).sum::<f64>() / n,
        humidity_avg: sorted.iter().map(|r| r.humidity).sum::<f64>() / n,
        reporting_count: sorted.len(),
    })
}

/// Every (sensor, slot) pair of the 5-minute grid over `[from, to]` that has
/// no reading, grouped per sensor.
pub fn detect_gaps(
    readings: &[SensorReading],
    from: SimTime,
    to: SimTime,
    sensor_ids: impl IntoIterator<Item = u8>,
) -> Vec<(u8, Vec<SimTime>)> {
    let seen: BTreeSet<(u8, SimTime)> = readings.iter().map(|r| (r.sensor_id, r.date)).collect();
    let first = SimTime(from.minutes().div_euclid(SENSOR_PERIOD_MIN) * SENSOR_PERIOD_MIN);
    let first = if first < from { first + SENSOR_PERIOD_MIN } else { first };
    let mut out = Vec::new();
    for id in sensor_ids {
        let mut missed = Vec::new();
        let mut t = first;
        while t <= to {
            if !seen.contains(&(id, t)) {
                missed.push(t);
            }
            t = t + SENSOR_PERIOD_MIN;
        }
        if !missed.is_empty() {
            out.push((id, missed));
        }
    }
    out
}

/// All node ids, 1-based.
pub fn all_sensor_ids() -> impl Iterator<Item = u8> {
    1..=ZONES as u8
}

/// Groups a reading log by window and aggregates each one.
pub fn ait_series(readings: &[SensorReading]) -> Vec<AitRecord> {
    let mut sorted: Vec<SensorReading> = readings.to_vec();
    sorted.sort_by_key(|r| (r.date, r.sensor_id));
    sorted
        .chunk_by(|a, b| a.date == b.date)
        .filter_map(|w| aggregate_ait(w).ok())
        .collect()
}
