//! Setpoint-tracking MPC over a first-order internal model.
//!
//! The controller minimises, over `p` future inputs `u_k ∈ [0, 1]`,
//!
//! ```text
//! J = w_track * Σ (y_{k+1} - y_sp)^2 + w_move * Σ (u_k - u_{k-1})^2
//! ```
//!
//! where `y` follows the zero-order-hold discretisation of the increasing
//! first-order model (see [`model`]).

pub mod model;
pub mod setpoint;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{discretize_internal_model, InternalModel};
pub use setpoint::{effective_setpoint, SetpointFeedback};
pub use solver::{solve, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Prediction (and control) horizon, steps.
    pub horizon: usize,
    /// Sampling time, minutes.
    pub sampling: f64,
    pub input_bounds: (f64, f64),
    pub tracking_weight: f64,
    pub move_weight: f64,
    /// Default comfort band, °C.
    pub comfort_band: (f64, f64),
    /// Feedback further than this outside the band is discarded, °C.
    pub outlier_margin: f64,
    /// In idle hours the setpoint is placed this far below the AIT, °C.
    pub idle_offset: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Share of each one-step prediction error folded into the estimated
    /// constant disturbance; 0 disables offset correction.
    pub disturbance_gain: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 48,
            sampling: 30.0,
            input_bounds: (0.0, 1.0),
            tracking_weight: 1.0,
            move_weight: 1.0,
            comfort_band: (20.0, 25.0),
            outlier_margin: 4.0,
            idle_offset: 5.0,
            max_iterations: 500,
            tolerance: 1e-6,
            disturbance_gain: 0.3,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("mpc.horizon must be >= 1".into()));
        }
        if !(self.sampling > 0.0) {
            return Err(Error::Config("mpc.sampling must be > 0".into()));
        }
        let (lo, hi) = self.input_bounds;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config("mpc.input_bounds must be a sub-interval of [0,1]".into()));
        }
        if !(self.tracking_weight >= 0.0) || !(self.move_weight >= 0.0) {
            return Err(Error::Config("mpc weights must be >= 0".into()));
        }
        if !(self.comfort_band.0 < self.comfort_band.1) {
            return Err(Error::Config("mpc.comfort_band must be increasing".into()));
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Config(
                "mpc.max_iterations and mpc.tolerance must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.disturbance_gain) {
            return Err(Error::Config("mpc.disturbance_gain must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn band_midpoint(&self) -> f64 {
        0.5 * (self.comfort_band.0 + self.comfort_band.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    /// Optimal inputs `u_0 .. u_{p-1}`.
    pub inputs: Vec<f64>,
    /// Predicted AIT `y_1 .. y_p`, °C.
    pub outputs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// KKT stationarity measure at the returned point.
    pub residual: f64,
    /// Objective after each iteration, starting with the initial point.
    pub history: Vec<f64>,
}
