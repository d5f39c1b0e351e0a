//! Day-ahead response curves by sequential prediction.

use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::dataset::DisturbanceSource;
use crate::error::{Error, Result};
use crate::fos::{extract_params, Direction, FosParams, TemperatureTrace, MONOTONE_TOLERANCE, SETTLE_FRACTION};
use crate::plant::Disturbances;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfCurve {
    /// Predicted AIT; timestamps are minutes from `start`.
    pub trace: TemperatureTrace,
    pub direction: Direction,
    pub t_init: f64,
    pub max_gain: f64,
    pub start: SimTime,
    /// Conditions fed to each prediction step.
    pub disturbances: Vec<Disturbances>,
}

/// Rolls the model forward from `t_init` in `step`-minute increments, each
/// prediction starting from the previous one. The increasing curve runs at
/// `max_gain`, the decreasing one with the AHU off.
#[allow(clippy::too_many_arguments)]
pub fn generate_edf(
    model: &dyn Predictor,
    direction: Direction,
    t_init: f64,
    max_gain: f64,
    source: &dyn DisturbanceSource,
    start: SimTime,
    horizon: i64,
    step: i64,
) -> Result<EdfCurve> {
    if model.direction() != direction {
        return Err(Error::DirectionMismatch {
            model: model.direction(),
            requested: direction,
        });
    }
    if step < 5 {
        return Err(Error::InvalidArgument(format!("EDF step must be >= 5 min, got {step}")));
    }
    if horizon < step || horizon > 1440 || horizon % step != 0 {
        return Err(Error::InvalidArgument(format!(
            "EDF horizon {horizon} must be a multiple of {step} within one day"
        )));
    }
    if !(0.0..=1.0).contains(&max_gain) || !t_init.is_finite() {
        return Err(Error::InvalidArgument(
            "EDF needs a finite start and a gain in [0,1]".into(),
        ));
    }
    let gain = match direction {
        Direction::Increasing => max_gain,
        Direction::Decreasing => 0.0,
    };
    let n = (horizon / step) as usize;
    let mut temps = Vec::with_capacity(n + 1);
    let mut disturbances = Vec::with_capacity(n);
    let mut y = t_init;
    temps.push(y);
    for k in 0..n {
        let d = source.at(start + k as i64 * step);
        let x = [y, step as f64, gain, d.t_out, d.h_out, d.w_speed, d.s_rad, d.s_energy];
        y += model.predict(&x)?;
        if !y.is_finite() {
            return Err(Error::NonFiniteState);
        }
        temps.push(y);
        disturbances.push(d);
    }
    Ok(EdfCurve {
        trace: TemperatureTrace::new(0.0, step as f64, temps)?,
        direction,
        t_init,
        max_gain,
        start,
        disturbances,
    })
}

/// First-order fit of a predicted curve. A curve that is monotone up to the
/// noise band goes through [`extract_params`]. A curve that peaks and then
/// drifts back, as daytime gains and surrogate error make it do, is fitted on
/// its running envelope up to the directional extremum: the gain is the
/// extremum minus the start, the time constant comes from the 98% crossing.
pub fn edf_to_fos(curve: &EdfCurve, delay: f64) -> Result<FosParams> {
    match extract_params(&curve.trace, curve.direction, delay) {
        Err(Error::NotMonotone { .. }) => envelope_fit(&curve.trace, curve.direction, delay),
        other => other,
    }
}

fn envelope_fit(trace: &TemperatureTrace, direction: Direction, delay: f64) -> Result<FosParams> {
    let samples = trace.samples();
    let sign = direction.sign();
    let (t0, initial) = samples[0];
    let peak = samples.iter().enumerate().fold(
        0,
        |best, (i, s)| if sign * s.1 > sign * samples[best].1 { i } else { best },
    );
    if peak + 1 == samples.len() {
        return Err(Error::UnsettledCurve);
    }
    let span = samples[peak].1 - initial;
    if sign * span <= MONOTONE_TOLERANCE {
        return Err(Error::FlatCurve { span });
    }
    let threshold = sign * initial + SETTLE_FRACTION * sign * span;
    let mut envelope = f64::NEG_INFINITY;
    let mut t_cross = samples[peak].0;
    for w in 0..=peak {
        let prev = envelope;
        envelope = envelope.max(sign * samples[w].1);
        if envelope >= threshold {
            t_cross = if w == 0 || envelope <= prev {
                samples[w].0
            } else {
                let (ta, tb) = (samples[w - 1].0, samples[w].0);
                ta + (threshold - prev) / (envelope - prev) * (tb - ta)
            };
            break;
        }
    }
    let tau = (t_cross - t0 - delay) / (1.0 / (1.0 - SETTLE_FRACTION)).ln();
    if !(tau > 0.0) {
        return Err(Error::InvalidParams(format!(
            "curve settles within the {delay} min delay"
        )));
    }
    FosParams::new(span, tau, delay, initial)
}
