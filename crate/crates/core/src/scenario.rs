//! Experiment description, loaded from TOML.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::fos::{FosParams, DEFAULT_DELAY_MIN};
use crate::mapper::{ProtectionPolicy, TargetForm, DEFAULT_EPSILON};
use crate::mpc::{MpcConfig, SetpointFeedback};
use crate::plant::{ActuatorMode, PlantCoefficients, WeatherConfig};
use crate::report::MotorParams;
use crate::surrogate::TrainConfig;
use crate::telemetry::{ControllerKind, SensorConfig};
use crate::time::{parse_clock, MINUTES_PER_DAY};

pub const SCHEMA_VERSION: u32 = 1;

/// Clock window `[start, stop)` as `"HH:MM"` strings.
pub type ClockWindow = [String; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Windows of the clock-based baseline.
    pub manual_windows: Vec<ClockWindow>,
    /// Hours in which the MPC tracks the occupants' setpoint; idle outside.
    pub operating_window: ClockWindow,
    /// Hours used for tracking statistics and occupancy gains.
    pub occupancy_window: ClockWindow,
    /// Daily model refresh from new response curves.
    pub edf_time: String,
    /// Nightly dataset build and retraining.
    pub retrain_time: String,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let w = |a: &str, b: &str| [a.to_string(), b.to_string()];
        ScheduleConfig {
            manual_windows: vec![w("06:00", "21:00")],
            operating_window: w("06:00", "21:00"),
            occupancy_window: w("08:00", "18:00"),
            edf_time: "06:00".into(),
            retrain_time: "00:30".into(),
        }
    }
}

/// Window bounds in minutes after midnight.
pub fn window_minutes(w: &ClockWindow) -> Result<(i64, i64)> {
    let (a, b) = (parse_clock(&w[0])?, parse_clock(&w[1])?);
    if a >= b {
        return Err(Error::Config(format!("window {}-{} is empty", w[0], w[1])));
    }
    Ok((a, b))
}

impl ScheduleConfig {
    pub fn manual_minutes(&self) -> Result<Vec<(i64, i64)>> {
        let mut ws = self
            .manual_windows
            .iter()
            .map(window_minutes)
            .collect::<Result<Vec<_>>>()?;
        ws.sort_unstable();
        if ws.windows(2).any(|p| p[1].0 < p[0].1) {
            return Err(Error::Config("manual windows overlap".into()));
        }
        Ok(ws)
    }
}

/// Gain and time constant of a first-order response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackFos {
    pub kp: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Dead time of the first-order models, minutes.
    pub delay: f64,
    /// Mapper end-temperature tolerance, °C.
    pub epsilon: f64,
    /// Motor protection threshold, minutes.
    pub protection_threshold: Option<f64>,
    /// Response-curve rollout step and horizon, minutes.
    pub edf_step: i64,
    pub edf_horizon: i64,
    /// Models used until the first curve extraction succeeds.
    pub fallback_increasing: FallbackFos,
    pub fallback_decreasing: FallbackFos,
    /// Reading of the FOS pair when mapping away from the fit temperature.
    pub mapper_form: TargetForm,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            delay: DEFAULT_DELAY_MIN,
            epsilon: DEFAULT_EPSILON,
            protection_threshold: Some(5.0),
            edf_step: 15,
            edf_horizon: 1440,
            fallback_increasing: FallbackFos { kp: 12.0, tau: 100.0 },
            fallback_decreasing: FallbackFos { kp: -12.0, tau: 200.0 },
            mapper_form: TargetForm::State,
        }
    }
}

impl ControlConfig {
    pub fn protection(&self) -> ProtectionPolicy {
        ProtectionPolicy {
            threshold: self.protection_threshold,
        }
    }

    pub fn fallback(&self, y_init: f64) -> Result<(FosParams, FosParams)> {
        let inc = FosParams::new(
            self.fallback_increasing.kp,
            self.fallback_increasing.tau,
            self.delay,
            y_init,
        )?;
        let dec = FosParams::new(
            self.fallback_decreasing.kp,
            self.fallback_decreasing.tau,
            self.delay,
            y_init,
        )?;
        Ok((inc, dec))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditions {
    pub zone_temp: f64,
    pub envelope_temp: f64,
    pub humidity: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        InitialConditions {
            zone_temp: 16.0,
            envelope_temp: 14.0,
            humidity: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupancyConfig {
    /// Occupied fraction inside the occupancy window on weekdays.
    pub weekday: f64,
    pub weekend: f64,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        OccupancyConfig {
            weekday: 0.8,
            weekend: 0.1,
        }
    }
}

/// Open-loop actuation of the warm-up days.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmupMode {
    /// The manual clock schedule.
    Clock,
    /// Seeded random ON/OFF blocks of 30 min to 4 h, so the first dataset
    /// covers heating and cooling from many starting temperatures.
    #[default]
    Excitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    /// First controlled day.
    pub start_date: NaiveDate,
    pub days: u32,
    /// Clock-controlled days before `start_date` that seed the dataset.
    #[serde(default = "default_warmup")]
    pub warmup_days: u32,
    #[serde(default)]
    pub warmup_mode: WarmupMode,
    pub controller: ControllerKind,
    #[serde(default = "default_actuator")]
    pub actuator: ActuatorMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Occupant feedback, JSONL; relative to the scenario file.
    #[serde(default)]
    pub feedback_file: Option<PathBuf>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub occupancy: OccupancyConfig,
    #[serde(default)]
    pub plant: PlantCoefficients,
    #[serde(default)]
    pub weather: WeatherConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub surrogate: TrainConfig,
    #[serde(default)]
    pub motor: MotorParams,
}

fn default_warmup() -> u32 {
    2
}

fn default_actuator() -> ActuatorMode {
    ActuatorMode::Binary
}

impl ScenarioConfig {
    /// Parses and validates a scenario file; relative paths inside it are
    /// resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = &cfg.feedback_file {
            if f.is_relative() {
                cfg.feedback_file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be >= 1".into()));
        }
        self.mpc.validate()?;
        let sampling = self.mpc.sampling;
        if sampling.fract() != 0.0 || MINUTES_PER_DAY % sampling as i64 != 0 {
            return Err(Error::Config(
                "mpc.sampling must be a whole divisor of a day in minutes".into(),
            ));
        }
        if !(self.control.delay >= 0.0 && self.control.delay < sampling) {
            return Err(Error::Config("control.delay must lie in [0, mpc.sampling)".into()));
        }
        if !(self.control.epsilon > 0.0) {
            return Err(Error::Config("control.epsilon must be > 0".into()));
        }
        self.control.protection().validate(sampling)?;
        let (step, horizon) = (self.control.edf_step, self.control.edf_horizon);
        if step < 5 || horizon < step || horizon > MINUTES_PER_DAY || horizon % step != 0 {
            return Err(Error::Config(
                "control.edf_step/edf_horizon must satisfy 5 <= step, step | horizon <= 1440".into(),
            ));
        }
        self.control.fallback(20.0)?;
        if self.control.fallback_increasing.kp <= 0.0 || self.control.fallback_decreasing.kp >= 0.0 {
            return Err(Error::Config(
                "fallback gains must be positive (increasing) and negative (decreasing)".into(),
            ));
        }
        self.schedule.manual_minutes()?;
        for w in [&self.schedule.operating_window, &self.schedule.occupancy_window] {
            window_minutes(w)?;
        }
        for t in [&self.schedule.edf_time, &self.schedule.retrain_time] {
            parse_clock(t)?;
        }
        for v in [self.occupancy.weekday, self.occupancy.weekend] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config("occupancy fractions must lie in [0,1]".into()));
            }
        }
        let i = &self.initial;
        if ![i.zone_temp, i.envelope_temp]
            .iter()
            .all(|t| (-30.0..=60.0).contains(t))
            || !(0.0..=100.0).contains(&i.humidity)
        {
            return Err(Error::Config("initial conditions out of range".into()));
        }
        self.plant.validate()?;
        self.dataset.validate()?;
        self.surrogate.validate()?;
        self.motor.validate()?;
        Ok(())
    }

    pub fn sampling_minutes(&self) -> i64 {
        self.mpc.sampling as i64
    }
}

/// Reads an occupant feedback script, sorted by time.
pub fn load_feedback(path: &Path) -> Result<Vec<SetpointFeedback>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: SetpointFeedback =
            serde_json::from_str(line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !f.value.is_finite() {
            return Err(Error::Parse(format!("{}:{}: non-finite value", path.display(), i + 1)));
        }
        out.push(f);
    }
    out.sort_by_key(|f| f.date);
    Ok(out)
}
