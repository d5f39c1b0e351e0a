//! First-order system with dead time (FOS).
//!
//! The response is written in deviation form about the initial temperature:
//!
//! ```text
//! y(t) = y_init                                         for t <  theta
//! y(t) = y_init + u * kp * (1 - exp(-(t - theta) / tau)) for t >= theta
//! ```
//!
//! so `kp` is the span of a full-gain step and `tau` is the time to 63% of it.
//! A decreasing curve is a step with negative `kp`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dead time observed on the testbed, minutes.
pub const DEFAULT_DELAY_MIN: f64 = 13.0;

/// Fraction of the span that marks a settled response.
pub const SETTLE_FRACTION: f64 = 0.98;

/// Samples within this band of the running extreme still count as monotone.
pub const MONOTONE_TOLERANCE: f64 = 0.05;

/// Fraction of the curve (its tail) averaged to obtain the final plateau.
pub const PLATEAU_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FosParams {
    /// Span of a full-gain step, °C. Negative for cooling curves.
    pub kp: f64,
    /// Time constant, minutes.
    pub tau: f64,
    /// Dead time, minutes.
    pub theta: f64,
    /// Starting temperature, °C.
    pub y_init: f64,
}

impl FosParams {
    pub fn new(kp: f64, tau: f64, theta: f64, y_init: f64) -> Result<Self> {
        let p = FosParams { kp, tau, theta, y_init };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.kp, self.tau, self.theta, self.y_init]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidParams("non-finite FOS parameter".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParams(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.theta < 0.0 {
            return Err(Error::InvalidParams(format!("theta must be >= 0, got {}", self.theta)));
        }
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        if self.kp >= 0.0 {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }

    pub fn with_y_init(self, y_init: f64) -> Self {
        FosParams { y_init, ..self }
    }

    /// Evaluates the step response without argument checks.
    #[inline]
    pub(crate) fn eval(&self, u: f64, t: f64) -> f64 {
        if t < self.theta {
            self.y_init
        } else {
            self.y_init + u * self.kp * (1.0 - (-(t - self.theta) / self.tau).exp())
        }
    }
}

/// Temperature at `t` minutes after a step of gain `u` is applied.
pub fn step_response(params: &FosParams, u: f64, t: f64) -> Result<f64> {
    params.validate()?;
    if !u.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("u must lie in [0,1], got {u}")));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    Ok(params.eval(u, t))
}

/// Uniformly sampled temperature curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureTrace {
    samples: Vec<(f64, f64)>,
    resolution: f64,
}

impl TemperatureTrace {
    pub fn new(start: f64, resolution: f64, temperatures: Vec<f64>) -> Result<Self> {
        if temperatures.is_empty() {
            return Err(Error::InvalidArgument("empty trace".into()));
        }
        if !(resolution > 0.0) || !start.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "trace resolution must be > 0, got {resolution}"
            )));
        }
        let samples = temperatures
            .into_iter()
            .enumerate()
            .map(|(i, y)| (start + i as f64 * resolution, y))
            .collect();
        Ok(TemperatureTrace { samples, resolution })
    }

    /// Builds a trace from explicit samples, checking the uniform grid.
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self> {
        match samples.len() {
            0 => return Err(Error::InvalidArgument("empty trace".into())),
            1 => {
                return Ok(TemperatureTrace {
                    samples,
                    resolution: 1.0,
                })
            }
            _ => {}
        }
        let resolution = samples[1].0 - samples[0].0;
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument("timestamps must increase".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].0 - w[0].0;
            if (dt - resolution).abs() > 1e-9 * resolution.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform spacing at sample {}: {dt} vs {resolution}",
                    i + 1
                )));
            }
        }
        Ok(TemperatureTrace { samples, resolution })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn first(&self) -> f64 {
        self.samples[0].1
    }

    pub fn last(&self) -> f64 {
        self.samples[self.samples.len() - 1].1
    }

    pub fn temperatures(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn shifted(&self, offset: f64) -> Self {
        TemperatureTrace {
            samples: self.samples.iter().map(|&(t, y)| (t + offset, y)).collect(),
            resolution: self.resolution,
        }
    }
}

/// Chains FOS segments: each `(duration, u)` restarts the response from the
/// previous endpoint. Segments with `u > 0` follow `inc` at gain `u`; segments
/// with `u == 0` follow the full decreasing curve `dec`.
pub fn simulate_schedule(
    inc: &FosParams,
    dec: &FosParams,
    schedule: &[(f64, f64)],
    y_start: f64,
    resolution: f64,
) -> Result<TemperatureTrace> {
    simulate_schedule_at(0.0, inc, dec, schedule, y_start, resolution)
}

/// [`simulate_schedule`] with the first sample at `start` minutes.
pub fn simulate_schedule_at(
    start: f64,
    inc: &FosParams,
    dec: &FosParams,
    schedule: &[(f64, f64)],
    y_start: f64,
    resolution: f64,
) -> Result<TemperatureTrace> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    inc.validate()?;
    dec.validate()?;
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument("resolution must be > 0".into()));
    }
    let mut temps = vec![y_start];
    let mut y = y_start;
    for &(duration, u) in schedule {
        if !(duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "segment duration must be > 0, got {duration}"
            )));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("u must lie in [0,1], got {u}")));
        }
        let steps = (duration / resolution).round();
        if (steps * resolution - duration).abs() > 1e-9 * duration {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution} does not divide segment duration {duration}"
            )));
        }
        let (params, gain) = segment_model(inc, dec, u);
        let params = params.with_y_init(y);
        for k in 1..=steps as usize {
            temps.push(params.eval(gain, k as f64 * resolution));
        }
        y = params.eval(gain, duration);
    }
    TemperatureTrace::new(start, resolution, temps)
}

/// Endpoint of one schedule segment, as used by [`simulate_schedule`].
pub fn segment_end(inc: &FosParams, dec: &FosParams, u: f64, y_start: f64, duration: f64) -> f64 {
    let (params, gain) = segment_model(inc, dec, u);
    params.with_y_init(y_start).eval(gain, duration)
}

fn segment_model<'a>(inc: &'a FosParams, dec: &'a FosParams, u: f64) -> (&'a FosParams, f64) {
    if u > 0.0 {
        (inc, u)
    } else {
        (dec, 1.0)
    }
}

/// Recovers gain and time constant from a measured or predicted step curve.
///
/// The gain is the final plateau (mean of the last 5% of samples) minus the
/// first sample. The time constant comes from the first crossing of 98% of
/// that span, linearly interpolated between samples: a first-order response
/// reaches 98% after `ln(50) * tau` (about 3.91 tau).
pub fn extract_params(curve: &TemperatureTrace, direction: Direction, delay: f64) -> Result<FosParams> {
    if !(delay >= 0.0) || !delay.is_finite() {
        return Err(Error::InvalidArgument(format!("delay must be >= 0, got {delay}")));
    }
    let samples = curve.samples();
    let n = samples.len();
    if n < 3 {
        return Err(Error::UnsettledCurve);
    }
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Err(Error::InvalidArgument("non-finite curve sample".into()));
    }

    let t0 = samples[0].0;
    let initial = samples[0].1;
    let window = ((n as f64 * PLATEAU_FRACTION).ceil() as usize).clamp(1, n - 1);
    let plateau = samples[n - window..].iter().map(|s| s.1).sum::<f64>() / window as f64;
    let span = plateau - initial;
    let sign = direction.sign();
    if sign * span <= MONOTONE_TOLERANCE {
        return Err(Error::FlatCurve { span });
    }

    // Monotone after the delay, up to the noise band.
    let mut extreme = f64::NEG_INFINITY;
    for &(t, y) in samples.iter().filter(|s| s.0 - t0 >= delay) {
        let oriented = sign * y;
        if oriented < extreme - MONOTONE_TOLERANCE {
            return Err(Error::NotMonotone {
                at: t,
                deviation: extreme - oriented,
            });
        }
        extreme = extreme.max(oriented);
    }

    let threshold = sign * (initial + SETTLE_FRACTION * span);
    let crossing = samples
        .iter()
        .position(|s| sign * s.1 >= threshold)
        .ok_or(Error::UnsettledCurve)?;
    if crossing >= n - window {
        return Err(Error::UnsettledCurve);
    }
    let t_cross = if crossing == 0 {
        samples[0].0
    } else {
        let (ta, ya) = samples[crossing - 1];
        let (tb, yb) = samples[crossing];
        let (ya, yb) = (sign * ya, sign * yb);
        if yb > ya {
            ta + (threshold - ya) / (yb - ya) * (tb - ta)
        } else {
            tb
        }
    };

    let tau = (t_cross - t0 - delay) / (1.0 / (1.0 - SETTLE_FRACTION)).ln();
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!(
            "curve settles within the {delay} min delay"
        )));
    }
    FosParams::new(span, tau, delay, initial)
}
