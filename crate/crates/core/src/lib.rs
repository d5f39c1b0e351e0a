//! Learned first-order thermal models and setpoint-tracking MPC for a
//! binary-controlled central air handling unit (AHU).
//!
//! The pipeline, end to end:
//!
//! 1. [`plant`] simulates a 24-zone building with one AHU and generates weather.
//! 2. [`telemetry`] samples the zones every five minutes, aggregates the
//!    average indoor temperature (AIT) and persists readings and control moves.
//! 3. [`dataset`] mines AHU operating sessions from the logs and expands them
//!    into two-point training samples.
//! 4. [`surrogate`] trains a five-hidden-layer MLP per direction, rolls it out
//!    into day-ahead response curves and reduces those to [`fos::FosParams`].
//! 5. [`mpc`] tracks the occupants' setpoint with the increasing-direction
//!    first-order model, and [`mapper`] turns the fractional action into an
//!    ON duration for a relay-driven fan.
//! 6. [`routine`] runs the daily schedule against the plant and [`report`]
//!    accounts energy against a clock-based baseline.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod fos;
pub mod mapper;
pub mod mpc;
pub mod plant;
pub mod report;
pub mod routine;
pub mod scenario;
pub mod surrogate;
pub mod telemetry;
pub mod time;

pub use error::{Error, Result};
pub use fos::{Direction, FosParams, TemperatureTrace};
pub use time::SimTime;
