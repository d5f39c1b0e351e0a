//! Energy accounting, controller comparison and result exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::TemperatureTrace;
use crate::plant::ActuatorMode;
use crate::surrogate::MetricsReport;
use crate::telemetry::store::JsonlStore;
use crate::telemetry::{AitRecord, ControllerKind, MpcMovement};
use crate::time::SimTime;

pub const MANIFEST_FILE: &str = "run.json";
pub const MOVEMENTS_FILE: &str = "movements.jsonl";
pub const AIT_FILE: &str = "ait.jsonl";
pub const METRICS_FILE: &str = "metrics.jsonl";

/// Three-phase motor energy: `hours * U * I * cos(phi) * sqrt(3) / 1000`.
pub fn energy_kwh(on_hours: f64, volts: f64, amperes: f64, cos_phi: f64) -> f64 {
    on_hours * volts * amperes * cos_phi * 3f64.sqrt() / 1000.0
}

/// Electrical rating of the AHU fan motor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorParams {
    pub volts: f64,
    pub amperes: f64,
    pub cos_phi: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        MotorParams {
            volts: 380.0,
            amperes: 15.4,
            cos_phi: 0.82,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.volts > 0.0 && self.amperes > 0.0) || !self.volts.is_finite() || !self.amperes.is_finite() {
            return Err(Error::Config("motor volts and amperes must be positive".into()));
        }
        if !(self.cos_phi > 0.0 && self.cos_phi <= 1.0) {
            return Err(Error::Config("motor cos_phi must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn kwh(&self, on_hours: f64) -> f64 {
        energy_kwh(on_hours, self.volts, self.amperes, self.cos_phi)
    }
}

/// Identity of a simulation run, written next to its stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days: u32,
    pub controller: ControllerKind,
    pub actuator: ActuatorMode,
    /// Control interval, minutes.
    pub sampling: f64,
    /// Occupied hours as minutes after midnight, `[start, stop)`.
    pub occupancy_window: (i64, i64),
    pub motor: MotorParams,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..i64::from(self.days)).map(|d| self.start_date + Duration::days(d))
    }

    fn in_occupancy(&self, t: SimTime) -> bool {
        (self.occupancy_window.0..self.occupancy_window.1).contains(&t.minute_of_day())
    }
}

/// One night's retraining outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub date: NaiveDate,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub increasing: Option<MetricsReport>,
    pub decreasing: Option<MetricsReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayEnergy {
    pub date: NaiveDate,
    pub on_hours: f64,
    pub kwh: f64,
}

/// |AIT - setpoint| over occupied hours, on the AIT grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingStats {
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnergy {
    pub controller: ControllerKind,
    pub per_day: Vec<DayEnergy>,
    pub on_hours: f64,
    pub kwh: f64,
    pub tracking: Option<TrackingStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days: u32,
    pub candidate: RunEnergy,
    pub baseline: RunEnergy,
    /// `(baseline - candidate) / baseline * 100`; absent when the baseline used nothing.
    pub savings_percent: Option<f64>,
}

pub fn savings_percent(baseline_kwh: f64, candidate_kwh: f64) -> Option<f64> {
    (baseline_kwh > 0.0).then(|| (baseline_kwh - candidate_kwh) / baseline_kwh * 100.0)
}

pub fn movement_kwh(m: &MpcMovement, motor: &MotorParams) -> f64 {
    motor.kwh(m.on_minutes / 60.0)
}

/// Per-day and total energy of one run's movements, restricted to the
/// manifest's dates.
pub fn run_energy(manifest: &RunManifest, movements: &[MpcMovement]) -> RunEnergy {
    let mut minutes: BTreeMap<NaiveDate, f64> = manifest.dates().map(|d| (d, 0.0)).collect();
    for m in movements {
        if let Some(v) = minutes.get_mut(&m.date.date()) {
            *v += m.on_minutes;
        }
    }
    let per_day: Vec<DayEnergy> = minutes
        .into_iter()
        .map(|(date, min)| DayEnergy {
            date,
            on_hours: min / 60.0,
            kwh: manifest.motor.kwh(min / 60.0),
        })
        .collect();
    RunEnergy {
        controller: manifest.controller,
        on_hours: per_day.iter().map(|d| d.on_hours).sum(),
        kwh: per_day.iter().map(|d| d.kwh).sum(),
        per_day,
        tracking: None,
    }
}

/// Compares each occupied-hour AIT record with the setpoint of the latest
/// movement at or before it.
pub fn tracking_stats(manifest: &RunManifest, movements: &[MpcMovement], ait: &[AitRecord]) -> Option<TrackingStats> {
    let first = SimTime::from_date(manifest.start_date);
    let end = first + i64::from(manifest.days) * crate::time::MINUTES_PER_DAY;
    let mut idx = 0;
    let mut setpoint = None;
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for r in ait.iter().filter(|r| r.timestamp >= first && r.timestamp < end) {
        while idx < movements.len() && movements[idx].date <= r.timestamp {
            setpoint = Some(movements[idx].setpoint);
            idx += 1;
        }
        let Some(sp) = setpoint else { continue };
        if !manifest.in_occupancy(r.timestamp) {
            continue;
        }
        let e = (r.ait - sp).abs();
        sum += e;
        max = max.max(e);
        n += 1;
    }
    (n > 0).then(|| TrackingStats {
        mean_abs_error: sum / n as f64,
        max_abs_error: max,
        samples: n,
    })
}

/// Loaded stores of one run directory.
#[derive(Debug, Clone)]
pub struct RunData {
    pub manifest: RunManifest,
    pub movements: Vec<MpcMovement>,
    pub ait: Vec<AitRecord>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = RunManifest::read(dir)?;
        let movements = JsonlStore::<MpcMovement>::read_path(&dir.join(MOVEMENTS_FILE))?;
        let ait_path = dir.join(AIT_FILE);
        let ait = if ait_path.exists() {
            JsonlStore::<AitRecord>::read_path(&ait_path)?
        } else {
            Vec::new()
        };
        Ok(RunData {
            manifest,
            movements,
            ait,
        })
    }

    pub fn energy(&self) -> RunEnergy {
        let mut e = run_energy(&self.manifest, &self.movements);
        e.tracking = tracking_stats(&self.manifest, &self.movements, &self.ait);
        e
    }
}

/// Energy of `candidate` against `baseline`; both must cover the same days
/// under the same weather seed.
pub fn compare_runs(candidate: &RunData, baseline: &RunData) -> Result<EnergyReport> {
    let (c, b) = (&candidate.manifest, &baseline.manifest);
    if c.seed != b.seed || c.start_date != b.start_date || c.days != b.days {
        return Err(Error::MismatchedRuns(format!(
            "candidate covers {} +{}d (seed {}), baseline covers {} +{}d (seed {})",
            c.start_date, c.days, c.seed, b.start_date, b.days, b.seed
        )));
    }
    let cand = candidate.energy();
    let base = baseline.energy();
    Ok(EnergyReport {
        seed: c.seed,
        start_date: c.start_date,
        days: c.days,
        savings_percent: savings_percent(base.kwh, cand.kwh),
        candidate: cand,
        baseline: base,
    })
}

pub fn compare(candidate_dir: &Path, baseline_dir: &Path) -> Result<EnergyReport> {
    compare_runs(&RunData::load(candidate_dir)?, &RunData::load(baseline_dir)?)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Movements as CSV: `date, ait, setpoint, u, on_minutes, kwh`.
pub fn write_movements_csv(path: &Path, movements: &[MpcMovement], motor: &MotorParams) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["date", "ait", "setpoint", "u", "on_minutes", "kwh"])
        .map_err(|e| csv_err(path, e))?;
    for m in movements {
        w.write_record([
            m.date.to_string(),
            format!("{:.4}", m.ait),
            format!("{:.4}", m.setpoint),
            format!("{:.6}", m.u),
            format!("{:.2}", m.on_minutes),
            format!("{:.6}", movement_kwh(m, motor)),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// AIT series as CSV: `date, ait, humidity, reporting_count`.
pub fn write_ait_csv(path: &Path, ait: &[AitRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["date", "ait", "humidity", "reporting_count"])
        .map_err(|e| csv_err(path, e))?;
    for r in ait {
        w.write_record([
            r.timestamp.to_string(),
            format!("{:.4}", r.ait),
            format!("{:.2}", r.humidity_avg),
            r.reporting_count.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-day energy of one run as CSV: `date, on_hours, kwh`.
pub fn write_energy_csv(path: &Path, energy: &RunEnergy) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["date", "on_hours", "kwh"])
        .map_err(|e| csv_err(path, e))?;
    for d in &energy.per_day {
        w.write_record([
            d.date.to_string(),
            format!("{:.4}", d.on_hours),
            format!("{:.4}", d.kwh),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Side-by-side daily energy of a comparison as CSV.
pub fn write_comparison_csv(path: &Path, report: &EnergyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let (c, b) = (
        report.candidate.controller.as_str(),
        report.baseline.controller.as_str(),
    );
    w.write_record([
        "date".to_string(),
        format!("{c}_on_hours"),
        format!("{c}_kwh"),
        format!("{b}_on_hours"),
        format!("{b}_kwh"),
    ])
    .map_err(|e| csv_err(path, e))?;
    for (x, y) in report.candidate.per_day.iter().zip(&report.baseline.per_day) {
        w.write_record([
            x.date.to_string(),
            format!("{:.4}", x.on_hours),
            format!("{:.4}", x.kwh),
            format!("{:.4}", y.on_hours),
            format!("{:.4}", y.kwh),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn tracking_line(t: &Option<TrackingStats>) -> String {
    match t {
        Some(t) => format!(
            "mean |AIT - setpoint| {:.3} C, max {:.3} C over {} occupied samples",
            t.mean_abs_error, t.max_abs_error, t.samples
        ),
        None => "no occupied-hour AIT records".to_string(),
    }
}

/// Energy summary of a single run.
pub fn format_run(manifest: &RunManifest, energy: &RunEnergy) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "run {} ({}, seed {})",
        manifest.name,
        manifest.controller.as_str(),
        manifest.seed
    );
    let _ = writeln!(s, "{:<12} {:>10} {:>10}", "date", "on_hours", "kwh");
    for d in &energy.per_day {
        let _ = writeln!(s, "{:<12} {:>10.3} {:>10.3}", d.date, d.on_hours, d.kwh);
    }
    let _ = writeln!(s, "{:<12} {:>10.3} {:>10.3}", "total", energy.on_hours, energy.kwh);
    let _ = writeln!(s, "tracking: {}", tracking_line(&energy.tracking));
    s
}

pub fn format_energy_report(r: &EnergyReport) -> String {
    let (c, b) = (r.candidate.controller.as_str(), r.baseline.controller.as_str());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "energy comparison: {} days from {} (seed {})",
        r.days, r.start_date, r.seed
    );
    let _ = writeln!(
        s,
        "{:<12} {:>12} {:>10} {:>12} {:>10}",
        "date",
        format!("{c}_hours"),
        format!("{c}_kwh"),
        format!("{b}_hours"),
        format!("{b}_kwh")
    );
    for (x, y) in r.candidate.per_day.iter().zip(&r.baseline.per_day) {
        let _ = writeln!(
            s,
            "{:<12} {:>12.3} {:>10.3} {:>12.3} {:>10.3}",
            x.date, x.on_hours, x.kwh, y.on_hours, y.kwh
        );
    }
    let _ = writeln!(
        s,
        "{:<12} {:>12.3} {:>10.3} {:>12.3} {:>10.3}",
        "total", r.candidate.on_hours, r.candidate.kwh, r.baseline.on_hours, r.baseline.kwh
    );
    match r.savings_percent {
        Some(p) => {
            let _ = writeln!(s, "savings: {p:.2}%");
        }
        None => {
            let _ = writeln!(s, "savings: n/a (baseline used no energy)");
        }
    }
    let _ = writeln!(s, "{c} tracking: {}", tracking_line(&r.candidate.tracking));
    let _ = writeln!(s, "{b} tracking: {}", tracking_line(&r.baseline.tracking));
    s
}

/// Surrogate quality per training window, one row per night, each cell
/// `increasing / decreasing`.
pub fn format_metrics_table(entries: &[DailyMetrics]) -> String {
    let rows: Vec<_> = entries
        .iter()
        .map(|e| {
            (
                format!("{} to {}", e.window_start, e.window_end),
                e.increasing.as_ref(),
                e.decreasing.as_ref(),
            )
        })
        .collect();
    format_metrics_rows(&rows)
}

/// Labelled rows of `increasing / decreasing` metric cells.
pub fn format_metrics_rows(entries: &[(String, Option<&MetricsReport>, Option<&MetricsReport>)]) -> String {
    fn cell(a: Option<&MetricsReport>, b: Option<&MetricsReport>, f: impl Fn(&MetricsReport) -> String) -> String {
        let g = |m: Option<&MetricsReport>| m.map_or_else(|| "-".to_string(), &f);
        format!("{} / {}", g(a), g(b))
    }
    let header = [
        "window",
        "dataset size",
        "mse",
        "scaled mae",
        "explained variance",
        "r squared",
    ];
    let mut rows: Vec<[String; 6]> = vec![header.map(String::from)];
    for (label, a, b) in entries {
        let (a, b) = (*a, *b);
        rows.push([
            label.clone(),
            cell(a, b, |m| (m.n_train + m.n_val + m.n_test).to_string()),
            cell(a, b, |m| format!("{:.4}", m.scores.mse)),
            cell(a, b, |m| format!("{:.4}", m.scores.scaled_mae)),
            cell(a, b, |m| format!("{:.4}", m.scores.explained_variance)),
            cell(a, b, |m| format!("{:.4}", m.scores.r_squared)),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        let _ = writeln!(s, "{}", line.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(s, "{}", rule.join("-+-"));
        }
    }
    s
}

/// Temperature curve as CSV: `minute, temperature`.
pub fn write_curve_csv(path: &Path, curve: &TemperatureTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["minute", "temperature"])
        .map_err(|e| csv_err(path, e))?;
    for &(t, y) in curve.samples() {
        w.write_record([t.to_string(), y.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<TemperatureTrace> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut samples = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        samples.push(rec.map_err(|e| csv_err(path, e))?);
    }
    TemperatureTrace::from_samples(samples)
}

pub fn read_metrics(path: &Path) -> Result<Vec<DailyMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Every export of one run directory, written into `out`.
pub fn export_run(run_dir: &Path, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let data = RunData::load(run_dir)?;
    let energy = data.energy();
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = out.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    emit("movements.csv", &|p| {
        write_movements_csv(p, &data.movements, &data.manifest.motor)
    })?;
    emit("ait.csv", &|p| write_ait_csv(p, &data.ait))?;
    emit("energy.csv", &|p| write_energy_csv(p, &energy))?;
    emit("energy.txt", &|p| {
        std::fs::write(p, format_run(&data.manifest, &energy)).map_err(|e| Error::io(p, e))
    })?;
    let metrics_path = run_dir.join(METRICS_FILE);
    if metrics_path.exists() {
        let entries = read_metrics(&metrics_path)?;
        emit("metrics.txt", &|p| {
            std::fs::write(p, format_metrics_table(&entries)).map_err(|e| Error::io(p, e))
        })?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos::Direction;
    use crate::surrogate::Scores;

    fn manifest(controller: ControllerKind) -> RunManifest {
        RunManifest {
            name: "t".into(),
            seed: 7,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 9).unwrap(),
            days: 2,
            controller,
            actuator: ActuatorMode::Binary,
            sampling: 30.0,
            occupancy_window: (480, 1080),
            motor: MotorParams::default(),
        }
    }

    fn mv(t: SimTime, on: f64, sp: f64) -> MpcMovement {
        MpcMovement {
            date: t,
            ait: 21.0,
            setpoint: sp,
            u: on / 30.0,
            on_minutes: on,
            controller: ControllerKind::Mpc,
        }
    }

    #[test]
    fn energy_anchors() {
        let m = MotorParams::default();
        assert!((m.kwh(1.0) - 8.31).abs() <= 0.02);
        let oracle = 380.0 * 15.4 * 0.82 * 3f64.sqrt() * 10.0 / 1000.0;
        assert!((m.kwh(10.0) - oracle).abs() < 1e-12);
        assert_eq!(m.kwh(0.0), 0.0);
    }

    #[test]
    fn motor_validation() {
        assert!(MotorParams::default().validate().is_ok());
        assert!(MotorParams {
            cos_phi: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MotorParams {
            cos_phi: 1.01,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(MotorParams {
            volts: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn savings_figures() {
        let p = savings_percent(11660.0, 4920.0).unwrap();
        assert!((p - 57.8045).abs() < 1e-4);
        assert_eq!(savings_percent(5.0, 5.0), Some(0.0));
        assert_eq!(savings_percent(0.0, 1.0), None);
    }

    #[test]
    fn per_day_totals_are_additive() {
        let man = manifest(ControllerKind::Mpc);
        let t0 = SimTime::from_date(man.start_date);
        let moves: Vec<_> = (0..96).map(|k| mv(t0 + 30 * k, (k % 31) as f64, 22.5)).collect();
        let e = run_energy(&man, &moves);
        assert_eq!(e.per_day.len(), 2);
        let direct: f64 = moves.iter().map(|m| movement_kwh(m, &man.motor)).sum();
        assert!((e.kwh - direct).abs() < 1e-9);
        assert!((e.on_hours * 60.0 - moves.iter().map(|m| m.on_minutes).sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn tracking_uses_latest_setpoint_in_occupied_hours() {
        let man = manifest(ControllerKind::Mpc);
        let t0 = SimTime::from_date(man.start_date);
        let moves = vec![mv(t0 + 450, 0.0, 22.0), mv(t0 + 600, 0.0, 20.0)];
        let rec = |t: SimTime, ait: f64| AitRecord {
            timestamp: t,
            ait,
            humidity_avg: 50.0,
            reporting_count: 24,
        };
        let ait = vec![
            rec(t0 + 300, 30.0),
            rec(t0 + 480, 23.0),
            rec(t0 + 600, 21.0),
            rec(t0 + 1100, 40.0),
        ];
        let s = tracking_stats(&man, &moves, &ait).unwrap();
        assert_eq!(s.samples, 2);
        assert!((s.mean_abs_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_rejects_mismatched_runs() {
        let a = RunData {
            manifest: manifest(ControllerKind::Mpc),
            movements: vec![],
            ait: vec![],
        };
        let mut b = a.clone();
        b.manifest.seed = 8;
        assert!(matches!(compare_runs(&a, &b), Err(Error::MismatchedRuns(_))));
        let r = compare_runs(&a, &a).unwrap();
        assert_eq!(r.savings_percent, None);
    }

    #[test]
    fn identical_runs_save_nothing_and_report_is_stable() {
        let man = manifest(ControllerKind::Manual);
        let t0 = SimTime::from_date(man.start_date);
        let run = RunData {
            manifest: man,
            movements: (0..10).map(|k| mv(t0 + 360 + 30 * k, 30.0, 22.5)).collect(),
            ait: vec![],
        };
        let r = compare_runs(&run, &run).unwrap();
        assert_eq!(r.savings_percent, Some(0.0));
        assert_eq!(
            format_energy_report(&r),
            format_energy_report(&compare_runs(&run, &run).unwrap())
        );
    }

    #[test]
    fn movements_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let t0 = SimTime::from_ymd_hm(2023, 1, 9, 6, 0);
        write_movements_csv(&p, &[mv(t0, 30.0, 22.5)], &MotorParams::default()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "date,ait,setpoint,u,on_minutes,kwh");
        assert!(lines
            .next()
            .unwrap()
            .starts_with("2023-01-09T06:00,21.0000,22.5000,1.000000,30.00,4.15"));
    }

    #[test]
    fn curve_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let trace = TemperatureTrace::new(0.0, 1.0, vec![20.0, 20.5, 20.875, 21.1]).unwrap();
        write_curve_csv(&p, &trace).unwrap();
        assert!(std::fs::read_to_string(&p)
            .unwrap()
            .starts_with("minute,temperature\n0,20\n"));
        assert_eq!(read_curve_csv(&p).unwrap(), trace);
    }

    #[test]
    fn metrics_table_has_both_directions() {
        let rep = |d, mse| MetricsReport {
            direction: d,
            scores: Scores {
                mse,
                scaled_mae: 0.1,
                explained_variance: 0.8,
                r_squared: 0.79,
            },
            cv_mse: 0.2,
            n_train: 70,
            n_val: 15,
            n_test: 15,
            n_fitted: 70,
        };
        let e = DailyMetrics {
            date: NaiveDate::from_ymd_opt(2023, 1, 10).unwrap(),
            window_start: NaiveDate::from_ymd_opt(2022, 11, 11).unwrap(),
            window_end: NaiveDate::from_ymd_opt(2023, 1, 9).unwrap(),
            increasing: Some(rep(Direction::Increasing, 0.0039)),
            decreasing: None,
        };
        let t = format_metrics_table(&[e]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("window"));
        assert!(lines[2].contains("0.0039 / -"));
        assert!(lines[2].contains("100 / -"));
    }
}
