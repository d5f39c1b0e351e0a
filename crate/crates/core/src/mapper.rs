//! Fractional MPC action to relay ON-time.
//!
//! A binary AHU cannot run at gain `u`. Instead it runs fully ON for `t`
//! minutes and OFF for the rest of the interval, with `t` chosen so that the
//! interval-end temperature matches what gain `u` would have produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::FosParams;
use crate::plant::ActuatorMode;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnTime {
    pub minutes: f64,
    /// False when no candidate met the tolerance and the closest was taken.
    pub exact: bool,
}

type EndTemperature = fn(&FosParams, &FosParams, f64, f64, f64) -> f64;

/// Interval-end temperature after `on` minutes at full gain followed by
/// `sampling - on` minutes off, both legs including the dead time.
pub fn on_off_end(inc: &FosParams, dec: &FosParams, t_init: f64, on: f64, sampling: f64) -> f64 {
    let mid = if on > 0.0 {
        inc.with_y_init(t_init).eval(1.0, on)
    } else {
        t_init
    };
    if on < sampling {
        dec.with_y_init(mid).eval(1.0, sampling - on)
    } else {
        mid
    }
}

/// How the FOS pair is read when the interval starts away from the
/// temperature the curves were fitted from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetForm {
    /// Both curves are shifted to start at the interval's temperature, as if
    /// the building were at rest there.
    #[default]
    Rest,
    /// Both curves keep their absolute plateaus: gain `u` relaxes toward
    /// `inc.y_init + u * inc.kp`, running relaxes toward the increasing
    /// plateau, and standing relaxes toward the decreasing one. The dead time
    /// delays the pulse and the equivalent gain alike, so legs start at once.
    State,
}

/// Interval-end temperature of the relaxation reading, see [`TargetForm::State`].
pub fn relaxed_end(inc: &FosParams, dec: &FosParams, t_init: f64, on: f64, sampling: f64) -> f64 {
    let leg = |shape: &FosParams, level: f64, from: f64, minutes: f64| {
        FosParams {
            kp: level - from,
            y_init: from,
            theta: 0.0,
            ..*shape
        }
        .eval(1.0, minutes)
    };
    let mid = if on > 0.0 {
        leg(inc, inc.y_init + inc.kp, t_init, on)
    } else {
        t_init
    };
    if on < sampling {
        leg(dec, dec.y_init + dec.kp, mid, sampling - on)
    } else {
        mid
    }
}

/// Shortest whole-minute ON time equivalent to gain `u` over one interval.
pub fn map_to_on_time(
    u: f64,
    inc: &FosParams,
    dec: &FosParams,
    t_init: f64,
    sampling: f64,
    epsilon: f64,
) -> Result<OnTime> {
    map_with_form(u, inc, dec, t_init, sampling, epsilon, TargetForm::Rest)
}

/// [`map_to_on_time`] under either reading of the curves.
pub fn map_with_form(
    u: f64,
    inc: &FosParams,
    dec: &FosParams,
    t_init: f64,
    sampling: f64,
    epsilon: f64,
    form: TargetForm,
) -> Result<OnTime> {
    inc.validate()?;
    dec.validate()?;
    if !u.is_finite() || !t_init.is_finite() {
        return Err(Error::InvalidArgument("non-finite mapper input".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(sampling >= 1.0) || sampling.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sampling must be a whole number of minutes, got {sampling}"
        )));
    }
    if u <= 0.0 {
        return Ok(OnTime {
            minutes: 0.0,
            exact: true,
        });
    }
    if u >= 1.0 {
        return Ok(OnTime {
            minutes: sampling,
            exact: true,
        });
    }

    let (target, end): (f64, EndTemperature) = match form {
        TargetForm::Rest => (inc.with_y_init(t_init).eval(u, sampling), on_off_end),
        TargetForm::State => {
            let level = inc.y_init + u * inc.kp;
            let shape = FosParams {
                kp: level - t_init,
                y_init: t_init,
                theta: 0.0,
                ..*inc
            };
            (shape.eval(1.0, sampling), relaxed_end)
        }
    };
    if target <= end(inc, dec, t_init, 0.0, sampling) + epsilon {
        return Ok(OnTime {
            minutes: 0.0,
            exact: true,
        });
    }
    let mut best = (f64::INFINITY, sampling);
    for t in 1..=sampling as u32 {
        let t = f64::from(t);
        let miss = (target - end(inc, dec, t_init, t, sampling)).abs();
        if miss <= epsilon {
            return Ok(OnTime {
                minutes: t,
                exact: true,
            });
        }
        if miss < best.0 {
            best = (miss, t);
        }
    }
    Ok(OnTime {
        minutes: best.1,
        exact: false,
    })
}

/// Motor protection against short ON or OFF pulses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionPolicy {
    /// Minutes; `None` disables the rounding.
    pub threshold: Option<f64>,
}

impl ProtectionPolicy {
    pub fn validate(&self, sampling: f64) -> Result<()> {
        match self.threshold {
            Some(th) if !(0.0..=sampling / 2.0).contains(&th) => Err(Error::Config(format!(
                "protection threshold {th} must lie in [0, {}]",
                sampling / 2.0
            ))),
            _ => Ok(()),
        }
    }
}

/// Rounds pulses no longer than the threshold to fully OFF, and gaps no
/// longer than the threshold to fully ON.
pub fn apply_protection(t_star: f64, policy: ProtectionPolicy, sampling: f64) -> f64 {
    match policy.threshold {
        Some(th) if t_star <= th => 0.0,
        Some(th) if sampling - t_star <= th => sampling,
        _ => t_star,
    }
}

/// What the actuator does during one control interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    /// Gain applied while running.
    pub gain: f64,
    /// Minutes of running from the start of the interval.
    pub on_minutes: f64,
    pub exact: bool,
}

/// Full mapping step: ON-time search plus protection for a relay-driven AHU,
/// pass-through for a variable-speed one.
#[allow(clippy::too_many_arguments)]
pub fn actuate(
    u: f64,
    mode: ActuatorMode,
    inc: &FosParams,
    dec: &FosParams,
    t_init: f64,
    sampling: f64,
    epsilon: f64,
    policy: ProtectionPolicy,
    form: TargetForm,
) -> Result<Actuation> {
    let u = u.clamp(0.0, 1.0);
    match mode {
        ActuatorMode::Analog => Ok(Actuation {
            gain: u,
            // Full-power equivalent, for energy accounting.
            on_minutes: u * sampling,
            exact: true,
        }),
        ActuatorMode::Binary => {
            let t = map_with_form(u, inc, dec, t_init, sampling, epsilon, form)?;
            Ok(Actuation {
                gain: 1.0,
                on_minutes: apply_protection(t.minutes, policy, sampling),
                exact: t.exact,
            })
        }
    }
}
