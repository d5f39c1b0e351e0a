//! Zero-order-hold discretisation of the deviation-form first-order model.
//!
//! With state `x = y - y_ref`, `dx/dt = (kp * u_eff - x) / tau`, where the
//! effective input lags the command by the dead time `theta < T`. Over one
//! sampling interval `T` the previous input is held for `theta` and the new
//! one for `T - theta`, giving
//!
//! ```text
//! x_{k+1} = a x_k + b_now u_k + b_prev u_{k-1}
//! a      = exp(-T / tau)
//! b_now  = kp (1 - exp(-(T - theta) / tau))
//! b_prev = kp exp(-(T - theta) / tau) (1 - exp(-theta / tau))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fos::FosParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalModel {
    pub a: f64,
    pub b_now: f64,
    pub b_prev: f64,
    /// Temperature at zero deviation, °C.
    pub y_ref: f64,
}

impl InternalModel {
    pub fn step(&self, x: f64, u_prev: f64, u: f64) -> f64 {
        self.a * x + self.b_now * u + self.b_prev * u_prev
    }

    pub fn deviation(&self, temperature: f64) -> f64 {
        temperature - self.y_ref
    }

    pub fn temperature(&self, x: f64) -> f64 {
        self.y_ref + x
    }

    /// Deviation reached when `u` is held forever.
    pub fn steady_state(&self, u: f64) -> f64 {
        (self.b_now + self.b_prev) * u / (1.0 - self.a)
    }

    /// Output offsets `c_1 .. c_n` that a constant additive disturbance `w`
    /// on the state adds to the predictions. Tracking `y_sp - c_k` without the
    /// disturbance is the same problem as tracking `y_sp` with it.
    pub fn disturbance_offsets(&self, w: f64, n: usize) -> Vec<f64> {
        let mut c = 0.0;
        (0..n)
            .map(|_| {
                c = self.a * c + w;
                c
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b_now.is_finite() && self.b_prev.is_finite() && self.y_ref.is_finite()
    }
}

pub fn discretize_internal_model(fos_inc: &FosParams, sampling: f64) -> Result<InternalModel> {
    fos_inc.validate()?;
    if !(sampling > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling must be > 0, got {sampling}")));
    }
    if fos_inc.theta >= sampling {
        return Err(Error::InvalidParams(format!(
            "dead time {} must be shorter than the sampling time {sampling}",
            fos_inc.theta
        )));
    }
    let FosParams { kp, tau, theta, y_init } = *fos_inc;
    let late = (-(sampling - theta) / tau).exp();
    Ok(InternalModel {
        a: (-sampling / tau).exp(),
        b_now: kp * (1.0 - late),
        b_prev: kp * late * (1.0 - (-theta / tau).exp()),
        y_ref: y_init,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_delay_matches_closed_form_zoh() {
        let fos = FosParams::new(4.0, 60.0, 0.0, 20.0).unwrap();
        let m = discretize_internal_model(&fos, 30.0).unwrap();
        assert_abs_diff_eq!(m.a, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.a, 0.606_530_659_712_633, epsilon = 1e-12);
        assert_abs_diff_eq!(m.b_now, 4.0 * (1.0 - m.a), epsilon = 1e-15);
        assert_eq!(m.b_prev, 0.0);
    }

    #[test]
    fn held_input_converges_to_gain() {
        let fos = FosParams::new(6.0, 90.0, 13.0, 18.0).unwrap();
        let m = discretize_internal_model(&fos, 30.0).unwrap();
        let mut x = 0.0;
        for _ in 0..200 {
            x = m.step(x, 1.0, 1.0);
        }
        assert_abs_diff_eq!(x, 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.steady_state(1.0), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn delay_must_fit_in_interval() {
        let fos = FosParams::new(6.0, 90.0, 30.0, 18.0).unwrap();
        assert!(discretize_internal_model(&fos, 30.0).is_err());
    }

    #[test]
    fn disturbance_offsets_are_the_prediction_shift() {
        let m = discretize_internal_model(&FosParams::new(6.0, 90.0, 13.0, 18.0).unwrap(), 30.0).unwrap();
        let inputs = [0.3, 0.9, 0.0, 0.5, 1.0];
        let (mut x, mut xw, mut prev) = (1.5, 1.5, 0.2);
        let offsets = m.disturbance_offsets(0.4, inputs.len());
        for (k, &u) in inputs.iter().enumerate() {
            x = m.step(x, prev, u);
            xw = m.step(xw, prev, u) + 0.4;
            prev = u;
            assert_abs_diff_eq!(xw - x, offsets[k], epsilon = 1e-12);
        }
    }
}
