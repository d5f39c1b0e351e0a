use serde::{Deserialize, Serialize};

use super::MpcConfig;
use crate::time::SimTime;

/// One occupant or administrator request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointFeedback {
    pub user_id: String,
    pub value: f64,
    pub date: SimTime,
}

/// Average of the feedback still in force at `now`.
///
/// A request stays valid for four increasing time constants, long enough for
/// the AHU to deliver it. Values outside the comfort band widened by
/// `outlier_margin` are treated as emotional feedback and ignored. With no
/// valid feedback the band midpoint is used.
pub fn effective_setpoint(feedbacks: &[SetpointFeedback], now: SimTime, tau_inc: f64, config: &MpcConfig) -> f64 {
    let tau = if tau_inc.is_finite() && tau_inc > 0.0 {
        tau_inc
    } else {
        0.0
    };
    let oldest = now.minutes() as f64 - 4.0 * tau;
    let lo = config.comfort_band.0 - config.outlier_margin;
    let hi = config.comfort_band.1 + config.outlier_margin;
    let (sum, n) = feedbacks
        .iter()
        .filter(|f| f.date <= now && f.date.minutes() as f64 >= oldest)
        .filter(|f| f.value.is_finite() && (lo..=hi).contains(&f.value))
        .fold((0.0, 0usize), |(s, n), f| (s + f.value, n + 1));
    if n == 0 {
        config.band_midpoint()
    } else {
        sum / n as f64
    }
}
