//! Closed-loop simulation of one scenario, minute by minute.
//!
//! Each simulated minute the sequence is: sense (on the 5-minute grid), run
//! the daily jobs that fall on this minute, decide (on the control grid), then
//! advance the plant by one minute under the command in force. Open-loop
//! warm-up days precede the first scenario day; they feed the first nightly
//! dataset but are not written to the stores.

use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_daily, write_samples, DisturbanceSource, Logs};
use crate::error::{Error, Result};
use crate::fos::{Direction, FosParams};
use crate::mapper::actuate;
use crate::mpc::{discretize_internal_model, effective_setpoint, ControlPlan, InternalModel, SetpointFeedback, Solver};
use crate::plant::weather::{mix, WEATHER_STEP_MIN};
use crate::plant::{clock_controller, ActuatorMode, AhuCommand, Disturbances, Plant, PlantState, WeatherGenerator};
use crate::report::{self, DailyMetrics, RunEnergy, RunManifest};
use crate::scenario::{load_feedback, window_minutes, ScenarioConfig, WarmupMode};
use crate::surrogate::{edf_to_fos, generate_edf, train, MlpModel};
use crate::telemetry::{
    sample_sensors, AitAggregator, AitRecord, ControllerKind, JsonlStore, MessageBus, MpcMovement, SensorReading,
    SENSORS_TOPIC, SENSOR_PERIOD_MIN,
};
use crate::time::{parse_clock, SimTime, MINUTES_PER_DAY};

pub const SENSOR_FILE: &str = "sensor.jsonl";
pub const FOS_FILE: &str = "fos.jsonl";
pub const MODELS_DIR: &str = "models";
pub const DATASETS_DIR: &str = "datasets";

/// Weather plus the occupancy schedule on the 5-minute grid.
#[derive(Debug, Clone)]
pub struct Environment {
    start: SimTime,
    samples: Vec<Disturbances>,
}

impl Environment {
    /// Conditions for the calendar days `first..=last`. Weather day indices
    /// count from the scenario's start date, so they do not depend on the
    /// number of warm-up days.
    pub fn for_scenario(cfg: &ScenarioConfig, first: NaiveDate, last: NaiveDate) -> Result<Self> {
        if last < first {
            return Err(Error::InvalidArgument(format!("empty day range {first}..{last}")));
        }
        let origin = SimTime::from_date(cfg.start_date);
        let generator = WeatherGenerator::new(cfg.weather.clone(), origin);
        let (occ_start, occ_stop) = window_minutes(&cfg.schedule.occupancy_window)?;
        let start = SimTime::from_date(first);
        let mut samples = Vec::new();
        let mut day = first;
        while day <= last {
            let midnight = SimTime::from_date(day);
            let weekend = matches!(day.weekday(), Weekday::Sat | Weekday::Sun);
            let level = if weekend {
                cfg.occupancy.weekend
            } else {
                cfg.occupancy.weekday
            };
            for (k, mut d) in generator
                .generate(cfg.seed, generator.day_index(midnight))
                .into_iter()
                .enumerate()
            {
                let minute = k as i64 * WEATHER_STEP_MIN;
                d.occupancy = if (occ_start..occ_stop).contains(&minute) {
                    level
                } else {
                    0.0
                };
                samples.push(d);
            }
            day += Duration::days(1);
        }
        Ok(Environment { start, samples })
    }
}

impl DisturbanceSource for Environment {
    /// Latest grid sample at or before `t`, clamped to the covered range.
    fn at(&self, t: SimTime) -> Disturbances {
        let k = (t - self.start).div_euclid(WEATHER_STEP_MIN);
        self.samples[k.clamp(0, self.samples.len() as i64 - 1) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FosSource {
    /// Extracted from today's predicted response curve.
    Edf,
    /// Extraction failed; the previous model was kept.
    Previous,
    /// No usable curve yet; configured defaults.
    Fallback,
}

/// One entry of the daily model log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FosRecord {
    pub date: SimTime,
    pub direction: Direction,
    pub kp: f64,
    pub tau: f64,
    pub theta: f64,
    pub y_init: f64,
    pub source: FosSource,
}

/// Outcome of a run, besides the files it wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub energy: RunEnergy,
    pub metrics: Vec<DailyMetrics>,
    pub fos: Vec<FosRecord>,
    /// Control instants with no AIT record; the previous command was held.
    pub ait_gaps: usize,
    /// Solves that hit the iteration cap; their best iterate was used.
    pub solver_failures: usize,
    /// Mapped ON times that missed the tolerance.
    pub inexact_maps: usize,
}

#[derive(Debug, Clone, Copy)]
enum Command {
    /// Full gain for `on_minutes` from `start`, then off.
    Relay { start: SimTime, on_minutes: f64 },
    /// Variable-speed drive at a constant gain.
    Analog { gain: f64 },
    /// The clock schedule decides each minute.
    Clock,
}

struct Stores {
    sensors: JsonlStore<SensorReading>,
    ait: JsonlStore<AitRecord>,
    movements: JsonlStore<MpcMovement>,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    out: PathBuf,
    env: Environment,
    plant: Plant,
    state: PlantState,
    bus: MessageBus,
    aggregator: AitAggregator,
    feedback: Vec<SetpointFeedback>,
    manual_windows: Vec<(f64, f64)>,
    operating: (i64, i64),
    sampling: i64,
    sensor_seed: u64,
    /// ON flag per control interval of the warm-up days.
    excitation: Vec<bool>,
    begin: SimTime,

    movements: Vec<MpcMovement>,
    ait: Vec<AitRecord>,
    stores: Option<Stores>,

    model_inc: Option<MlpModel>,
    model_dec: Option<MlpModel>,
    fos_inc: FosParams,
    fos_dec: FosParams,
    fos_from_edf: bool,
    internal: InternalModel,
    last_plan: Option<Vec<f64>>,
    u_prev: f64,
    /// Estimated constant disturbance on the internal model's state, and the
    /// deviation it predicted for the next control step.
    disturbance: f64,
    predicted: Option<f64>,
    command: Command,
    /// Commands still travelling to the zones, oldest first.
    in_transit: VecDeque<AhuCommand>,

    metrics: Vec<DailyMetrics>,
    fos_log: Vec<FosRecord>,
    ait_gaps: usize,
    solver_failures: usize,
    inexact_maps: usize,
}

/// Runs `cfg` end to end and writes every store and report into `out`.
/// Files of a previous run in `out` are replaced.
pub fn run(cfg: &ScenarioConfig, out: &Path, export_datasets: bool) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for name in [
        report::MANIFEST_FILE,
        report::MOVEMENTS_FILE,
        report::AIT_FILE,
        report::METRICS_FILE,
        SENSOR_FILE,
        FOS_FILE,
    ] {
        let p = out.join(name);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }

    let manifest = RunManifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        start_date: cfg.start_date,
        days: cfg.days,
        controller: cfg.controller,
        actuator: cfg.actuator,
        sampling: cfg.mpc.sampling,
        occupancy_window: window_minutes(&cfg.schedule.occupancy_window)?,
        motor: cfg.motor,
    };
    manifest.write(out)?;

    let mut sim = Sim::new(cfg, out)?;
    let first = SimTime::from_date(cfg.start_date);
    let begin = first - i64::from(cfg.warmup_days) * MINUTES_PER_DAY;
    let end = first + i64::from(cfg.days) * MINUTES_PER_DAY;
    let retrain = parse_clock(&cfg.schedule.retrain_time)?;
    let edf = parse_clock(&cfg.schedule.edf_time)?;

    let mut t = begin;
    while t < end {
        let controlled = t >= first;
        if controlled && sim.stores.is_none() {
            sim.open_stores()?;
            info!("warm-up done; controlling with {} from {t}", cfg.controller.as_str());
        }
        if t.is_aligned(SENSOR_PERIOD_MIN) {
            sim.sense(t)?;
        }
        if controlled && cfg.controller == ControllerKind::Mpc {
            if t.minute_of_day() == retrain {
                sim.retrain(t)?;
            }
            if t.minute_of_day() == edf {
                sim.refresh_models(t)?;
            }
        }
        if t.is_aligned(sim.sampling) {
            sim.decide(t, controlled)?;
        }
        sim.advance(t)?;
        t = t + 1;
    }
    if let Some(stores) = sim.stores.as_mut() {
        stores.sensors.flush()?;
        stores.ait.flush()?;
        stores.movements.flush()?;
    }
    if export_datasets {
        sim.export_datasets(end - 1)?;
    }

    report::export_run(out, out)?;
    let data = report::RunData::load(out)?;
    let energy = data.energy();
    let mut text = report::format_run(&manifest, &energy);
    if !sim.metrics.is_empty() {
        text.push('\n');
        text.push_str(&report::format_metrics_table(&sim.metrics));
    }
    let report_path = out.join("report.txt");
    std::fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;

    Ok(RunSummary {
        manifest,
        energy,
        metrics: sim.metrics,
        fos: sim.fos_log,
        ait_gaps: sim.ait_gaps,
        solver_failures: sim.solver_failures,
        inexact_maps: sim.inexact_maps,
    })
}

fn append_line<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, record)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Alternating ON/OFF blocks of 30 min to 4 h, one flag per interval.
fn excitation_plan(seed: u64, intervals: usize, sampling: i64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_blocks = (240 / sampling).max(1) as usize;
    let min_blocks = ((30 + sampling - 1) / sampling).max(1) as usize;
    let mut on = rng.gen::<bool>();
    let mut plan = Vec::with_capacity(intervals);
    while plan.len() < intervals {
        let n = rng.gen_range(min_blocks..=max_blocks.max(min_blocks));
        plan.extend(std::iter::repeat_n(on, n));
        on = !on;
    }
    plan.truncate(intervals);
    plan
}

/// Minutes of `[from, from + len)` covered by the windows.
fn overlap(from: f64, len: f64, windows: &[(f64, f64)]) -> f64 {
    windows
        .iter()
        .map(|&(a, b)| (b.min(from + len) - a.max(from)).max(0.0))
        .sum()
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, out: &Path) -> Result<Self> {
        let first_day = cfg.start_date - Duration::days(i64::from(cfg.warmup_days));
        let last_day = cfg.start_date + Duration::days(i64::from(cfg.days));
        let env = Environment::for_scenario(cfg, first_day, last_day)?;
        let plant = Plant::new(cfg.plant.clone())?;
        let mut state = PlantState::uniform(cfg.initial.zone_temp, cfg.initial.humidity);
        state.envelope_temp = cfg.initial.envelope_temp;
        state.validate()?;
        let feedback = match &cfg.feedback_file {
            Some(p) => load_feedback(p)?,
            None => Vec::new(),
        };
        let manual_windows = cfg
            .schedule
            .manual_minutes()?
            .into_iter()
            .map(|(a, b)| (a as f64, b as f64))
            .collect();
        let (fos_inc, fos_dec) = cfg.control.fallback(cfg.initial.zone_temp)?;
        let internal = discretize_internal_model(&fos_inc, cfg.mpc.sampling)?;
        Ok(Sim {
            cfg,
            out: out.to_path_buf(),
            env,
            plant,
            state,
            bus: MessageBus::new(),
            aggregator: AitAggregator::new(SENSORS_TOPIC),
            feedback,
            manual_windows,
            operating: window_minutes(&cfg.schedule.operating_window)?,
            sampling: cfg.sampling_minutes(),
            sensor_seed: mix(cfg.seed, 0x5e45),
            excitation: excitation_plan(
                mix(cfg.seed, 0xe8c1),
                (i64::from(cfg.warmup_days) * MINUTES_PER_DAY / cfg.sampling_minutes()) as usize,
                cfg.sampling_minutes(),
            ),
            begin: SimTime::from_date(first_day),
            movements: Vec::new(),
            ait: Vec::new(),
            stores: None,
            model_inc: None,
            model_dec: None,
            fos_inc,
            fos_dec,
            fos_from_edf: false,
            internal,
            last_plan: None,
            u_prev: 0.0,
            disturbance: 0.0,
            predicted: None,
            command: Command::Clock,
            in_transit: std::iter::repeat_n(AhuCommand::off(), cfg.plant.transport_delay as usize).collect(),
            metrics: Vec::new(),
            fos_log: Vec::new(),
            ait_gaps: 0,
            solver_failures: 0,
            inexact_maps: 0,
        })
    }

    fn open_stores(&mut self) -> Result<()> {
        self.stores = Some(Stores {
            sensors: JsonlStore::open(self.out.join(SENSOR_FILE))?,
            ait: JsonlStore::open(self.out.join(report::AIT_FILE))?,
            movements: JsonlStore::open(self.out.join(report::MOVEMENTS_FILE))?,
        });
        Ok(())
    }

    fn sense(&mut self, t: SimTime) -> Result<()> {
        let readings = sample_sensors(&self.state, t, self.sensor_seed, &self.cfg.sensors)?;
        for r in &readings {
            self.bus.publish(SENSORS_TOPIC, serde_json::to_string(r)?);
        }
        let (received, records) = self.aggregator.drain(&self.bus);
        if records.is_empty() {
            warn!("{t}: no sensor reported");
        }
        if let Some(stores) = self.stores.as_mut() {
            for r in &received {
                stores.sensors.write_buffered(r)?;
            }
            for r in &records {
                stores.ait.write_buffered(r)?;
            }
        }
        self.ait.extend(records);
        Ok(())
    }

    fn latest_ait(&self) -> Option<&AitRecord> {
        self.ait.last()
    }

    fn day_index(&self, t: SimTime) -> u64 {
        ((t.start_of_day() - SimTime::from_date(self.cfg.start_date)) / MINUTES_PER_DAY) as u64
    }

    /// Nightly dataset build over the trailing window and retraining of both
    /// direction models.
    fn retrain(&mut self, t: SimTime) -> Result<()> {
        let day = self.day_index(t);
        let window_end = t.date() - Duration::days(1);
        let logs = Logs {
            movements: &self.movements,
            ait: &self.ait,
            mode: self.cfg.actuator,
            sampling: self.sampling,
        };
        let data = match build_daily(
            window_end,
            logs,
            &self.env,
            &self.cfg.dataset,
            mix(self.cfg.seed, 0x100 + day),
        ) {
            Ok(d) => d,
            Err(e) => {
                warn!("{t}: dataset build failed, keeping models: {e}");
                return Ok(());
            }
        };
        let models_dir = self.out.join(MODELS_DIR);
        std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
        let mut entry = DailyMetrics {
            date: t.date(),
            window_start: data.window_start,
            window_end: data.window_end,
            increasing: None,
            decreasing: None,
        };
        for direction in [Direction::Increasing, Direction::Decreasing] {
            let slot = match direction {
                Direction::Increasing => &mut self.model_inc,
                Direction::Decreasing => &mut self.model_dec,
            };
            let seed = mix(
                self.cfg.seed,
                0x200 + 2 * day + u64::from(direction == Direction::Decreasing),
            );
            match train(data.get(direction), direction, &self.cfg.surrogate, seed, slot.as_ref()) {
                Ok((mut model, metrics)) => {
                    model.window = Some((data.window_start, data.window_end));
                    model.save(&models_dir.join(format!("{}.json", direction.as_str())))?;
                    info!(
                        "{t}: {} model trained on {} samples, test scaled MAE {:.4}",
                        direction.as_str(),
                        metrics.n_fitted,
                        metrics.scores.scaled_mae
                    );
                    *slot = Some(model);
                    match direction {
                        Direction::Increasing => entry.increasing = Some(metrics),
                        Direction::Decreasing => entry.decreasing = Some(metrics),
                    }
                }
                Err(e) => warn!("{t}: {} training failed, keeping model: {e}", direction.as_str()),
            }
        }
        append_line(&self.out.join(report::METRICS_FILE), &entry)?;
        self.metrics.push(entry);
        Ok(())
    }

    /// Day-ahead curves from the current AIT and the first-order models
    /// extracted from them. The cooling curve starts where the heating curve
    /// ends.
    fn refresh_models(&mut self, t: SimTime) -> Result<()> {
        let Some(ait) = self.latest_ait().map(|r| r.ait) else {
            warn!("{t}: no AIT yet, model refresh skipped");
            return Ok(());
        };
        let c = &self.cfg.control;
        let curve = |model: &Option<MlpModel>, direction, start_temp| -> Result<(FosParams, f64)> {
            let model = model
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("no trained model".into()))?;
            let curve = generate_edf(
                model,
                direction,
                start_temp,
                1.0,
                &self.env,
                t,
                c.edf_horizon,
                c.edf_step,
            )?;
            Ok((edf_to_fos(&curve, c.delay)?, curve.trace.last()))
        };
        let inc = curve(&self.model_inc, Direction::Increasing, ait);
        let dec_start = match &inc {
            Ok((_, end)) => *end,
            Err(_) => ait + self.fos_inc.kp,
        };
        let dec = curve(&self.model_dec, Direction::Decreasing, dec_start);

        let (fallback_inc, fallback_dec) = c.fallback(ait)?;
        let inc_source = match inc {
            Ok((f, _)) => {
                self.fos_inc = f;
                FosSource::Edf
            }
            Err(e) => {
                warn!("{t}: increasing curve unusable ({e}); keeping previous model");
                self.fos_inc = if self.fos_from_edf {
                    self.fos_inc.with_y_init(ait)
                } else {
                    fallback_inc
                };
                if self.fos_from_edf {
                    FosSource::Previous
                } else {
                    FosSource::Fallback
                }
            }
        };
        let dec_source = match dec {
            Ok((f, _)) => {
                self.fos_dec = f;
                FosSource::Edf
            }
            Err(e) => {
                warn!("{t}: decreasing curve unusable ({e}); keeping previous model");
                if self
                    .fos_log
                    .iter()
                    .any(|r| r.direction == Direction::Decreasing && r.source == FosSource::Edf)
                {
                    FosSource::Previous
                } else {
                    self.fos_dec = fallback_dec;
                    FosSource::Fallback
                }
            }
        };
        self.fos_from_edf |= inc_source == FosSource::Edf;
        self.internal = discretize_internal_model(&self.fos_inc, self.cfg.mpc.sampling)?;
        self.last_plan = None;
        self.disturbance = 0.0;
        self.predicted = None;
        for (direction, p, source) in [
            (Direction::Increasing, self.fos_inc, inc_source),
            (Direction::Decreasing, self.fos_dec, dec_source),
        ] {
            let rec = FosRecord {
                date: t,
                direction,
                kp: p.kp,
                tau: p.tau,
                theta: p.theta,
                y_init: p.y_init,
                source,
            };
            append_line(&self.out.join(FOS_FILE), &rec)?;
            self.fos_log.push(rec);
        }
        Ok(())
    }

    fn setpoint(&self, t: SimTime, ait: f64) -> f64 {
        let m = t.minute_of_day();
        if (self.operating.0..self.operating.1).contains(&m) {
            effective_setpoint(&self.feedback, t, self.fos_inc.tau, &self.cfg.mpc)
        } else {
            // Below both the AIT and the model's rest temperature, so the
            // optimum is to stay off.
            ait.min(self.internal.y_ref) - self.cfg.mpc.idle_offset
        }
    }

    fn decide(&mut self, t: SimTime, controlled: bool) -> Result<()> {
        let current = self.latest_ait().filter(|r| r.timestamp == t).map(|r| r.ait);
        let last_known = self.latest_ait().map_or(self.cfg.initial.zone_temp, |r| r.ait);
        let kind = if controlled {
            self.cfg.controller
        } else {
            ControllerKind::Manual
        };
        let s = self.sampling as f64;

        let movement = match kind {
            ControllerKind::Manual if !controlled && self.cfg.warmup_mode == WarmupMode::Excitation => {
                let k = ((t - self.begin) / self.sampling) as usize;
                let on = if self.excitation.get(k).copied().unwrap_or(false) {
                    s
                } else {
                    0.0
                };
                self.command = Command::Relay {
                    start: t,
                    on_minutes: on,
                };
                MpcMovement {
                    date: t,
                    ait: current.unwrap_or(last_known),
                    setpoint: self.setpoint(t, current.unwrap_or(last_known)),
                    u: on / s,
                    on_minutes: on,
                    controller: ControllerKind::Manual,
                }
            }
            ControllerKind::Manual => {
                let on = overlap(t.minute_of_day() as f64, s, &self.manual_windows);
                self.command = Command::Clock;
                MpcMovement {
                    date: t,
                    ait: current.unwrap_or(last_known),
                    setpoint: self.setpoint(t, current.unwrap_or(last_known)),
                    u: on / s,
                    on_minutes: on,
                    controller: ControllerKind::Manual,
                }
            }
            ControllerKind::Mpc => match current {
                None => {
                    self.ait_gaps += 1;
                    self.predicted = None;
                    warn!("{t}: AIT missing, holding previous command");
                    let prev = self.movements.last().cloned();
                    let (u, on) = prev.as_ref().map_or((0.0, 0.0), |m| (m.u, m.on_minutes));
                    self.command = match self.command {
                        Command::Relay { .. } => Command::Relay {
                            start: t,
                            on_minutes: on,
                        },
                        other => other,
                    };
                    MpcMovement {
                        date: t,
                        ait: last_known,
                        setpoint: prev.map_or_else(|| self.setpoint(t, last_known), |m| m.setpoint),
                        u,
                        on_minutes: on,
                        controller: ControllerKind::Mpc,
                    }
                }
                Some(ait) => self.control_step(t, ait)?,
            },
        };
        if let Some(stores) = self.stores.as_mut() {
            stores.movements.write_buffered(&movement)?;
        }
        self.movements.push(movement);
        Ok(())
    }

    fn control_step(&mut self, t: SimTime, ait: f64) -> Result<MpcMovement> {
        let cfg = self.cfg;
        let setpoint = self.setpoint(t, ait);
        let x0 = self.internal.deviation(ait);
        if let Some(pred) = self.predicted.take() {
            self.disturbance += cfg.mpc.disturbance_gain * (x0 - pred);
        }
        // Offset correction only while tracking; idle targets stay far below.
        let operating = (self.operating.0..self.operating.1).contains(&t.minute_of_day());
        let targets: Vec<f64> = if operating {
            let offsets = self.internal.disturbance_offsets(self.disturbance, cfg.mpc.horizon);
            offsets.iter().map(|c| setpoint - c).collect()
        } else {
            vec![setpoint; cfg.mpc.horizon]
        };
        let warm = self.last_plan.as_ref().map(|p| {
            let mut w = p[1..].to_vec();
            w.push(*p.last().expect("non-empty plan"));
            w
        });
        let solver = Solver::new(&cfg.mpc, &self.internal);
        let plan: Option<ControlPlan> = match solver.solve(x0, self.u_prev, &targets, warm.as_deref()) {
            Ok(p) => Some(p),
            Err(Error::NonConvergence {
                iterations,
                residual,
                best,
            }) => {
                self.solver_failures += 1;
                warn!("{t}: solver stopped after {iterations} iterations (residual {residual:.2e})");
                Some(*best)
            }
            Err(e) => {
                warn!("{t}: solver failed ({e}); AHU off");
                None
            }
        };
        let u = plan.as_ref().map_or(0.0, |p| p.inputs[0]);
        if let Some(p) = &plan {
            debug!("{t}: solved in {} iterations, u0 = {u:.4}", p.iterations);
        }
        self.last_plan = plan.map(|p| p.inputs);
        self.predicted = Some(self.internal.step(x0, self.u_prev, u) + self.disturbance);
        self.u_prev = u;

        let a = actuate(
            u,
            cfg.actuator,
            &self.fos_inc,
            &self.fos_dec,
            ait,
            self.sampling as f64,
            cfg.control.epsilon,
            cfg.control.protection(),
            cfg.control.mapper_form,
        )?;
        if !a.exact {
            self.inexact_maps += 1;
        }
        self.command = match cfg.actuator {
            ActuatorMode::Binary => Command::Relay {
                start: t,
                on_minutes: a.on_minutes,
            },
            ActuatorMode::Analog => Command::Analog { gain: a.gain },
        };
        Ok(MpcMovement {
            date: t,
            ait,
            setpoint,
            u,
            on_minutes: a.on_minutes,
            controller: ControllerKind::Mpc,
        })
    }

    fn advance(&mut self, t: SimTime) -> Result<()> {
        let cmd = match self.command {
            Command::Clock => clock_controller(t.minute_of_day() as f64, &self.manual_windows),
            Command::Relay { start, on_minutes } => {
                if ((t - start) as f64) < on_minutes {
                    AhuCommand::on()
                } else {
                    AhuCommand::off()
                }
            }
            Command::Analog { gain } => AhuCommand::new(gain, ActuatorMode::Analog)?,
        };
        self.in_transit.push_back(cmd);
        let applied = self.in_transit.pop_front().expect("just pushed");
        let dist = self.env.at(t);
        self.state = self.plant.step(&self.state, applied, &dist, 1.0)?;
        Ok(())
    }

    fn export_datasets(&self, last: SimTime) -> Result<()> {
        let logs = Logs {
            movements: &self.movements,
            ait: &self.ait,
            mode: self.cfg.actuator,
            sampling: self.sampling,
        };
        let data = build_daily(
            last.date(),
            logs,
            &self.env,
            &self.cfg.dataset,
            mix(self.cfg.seed, 0x300),
        )?;
        let dir = self.out.join(DATASETS_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for direction in [Direction::Increasing, Direction::Decreasing] {
            let split = data.get(direction);
            for (name, samples) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
                write_samples(&dir.join(format!("{}_{name}.jsonl", direction.as_str())), samples)?;
            }
        }
        Ok(())
    }
}

/// Reads a model log written by [`run`].
pub fn read_fos_log(path: &Path) -> Result<Vec<FosRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(controller: &str, days: u32) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!(
            r#"
schema_version = 1
name = "unit"
seed = 7
start_date = "2023-01-09"
days = {days}
warmup_days = 1
controller = "{controller}"

[surrogate]
hidden = [8, 8, 8, 8, 8]
max_epochs = 3
patience = 2
folds = 2
max_train_samples = 400
"#
        ))
        .unwrap()
    }

    #[test]
    fn excitation_blocks_alternate_within_bounds() {
        let plan = excitation_plan(3, 96, 30);
        assert_eq!(plan.len(), 96);
        assert_eq!(plan, excitation_plan(3, 96, 30));
        assert!(plan.iter().any(|&b| b) && plan.iter().any(|&b| !b));
        let mut runs = Vec::new();
        let mut len = 1;
        for w in plan.windows(2) {
            if w[0] == w[1] {
                len += 1;
            } else {
                runs.push(len);
                len = 1;
            }
        }
        // The last run may be cut short by the truncation.
        assert!(runs.iter().all(|&r| (1..=8).contains(&r)), "{runs:?}");
    }

    #[test]
    fn window_overlap() {
        let w = [(360.0, 1260.0)];
        assert_eq!(overlap(330.0, 30.0, &w), 0.0);
        assert_eq!(overlap(345.0, 30.0, &w), 15.0);
        assert_eq!(overlap(600.0, 30.0, &w), 30.0);
        assert_eq!(overlap(1260.0, 30.0, &w), 0.0);
    }

    #[test]
    fn manual_run_follows_the_clock() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&scenario("manual", 2), dir.path(), false).unwrap();
        let data = report::RunData::load(dir.path()).unwrap();
        assert_eq!(data.movements.len(), 96);
        for m in &data.movements {
            let on = (360..1260).contains(&m.date.minute_of_day());
            assert_eq!(m.on_minutes, if on { 30.0 } else { 0.0 }, "{}", m.date);
        }
        assert!((s.energy.on_hours - 30.0).abs() < 1e-9);
        assert!(s.metrics.is_empty() && s.fos.is_empty());
    }

    #[test]
    fn mpc_run_is_deterministic_and_idles_off_hours() {
        let cfg = scenario("mpc", 2);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = run(&cfg, a.path(), false).unwrap();
        run(&cfg, b.path(), false).unwrap();
        for f in [report::MOVEMENTS_FILE, report::AIT_FILE, FOS_FILE, "report.txt"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
        let data = report::RunData::load(a.path()).unwrap();
        assert_eq!(data.movements.len(), 96);
        for m in data
            .movements
            .iter()
            .filter(|m| !(360..1260).contains(&m.date.minute_of_day()))
        {
            assert_eq!(m.on_minutes, 0.0, "{}", m.date);
        }
        // One retrain and one refresh per controlled day; the second window
        // ends one day later.
        assert_eq!(sa.metrics.len(), 2);
        assert_eq!(sa.metrics[1].window_end - sa.metrics[0].window_end, Duration::days(1));
        assert_eq!(sa.fos.len(), 4);
    }
}
