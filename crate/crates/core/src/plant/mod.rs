//! Ground-truth building: 24 zones around one shared envelope node, heated by
//! a single AHU.
//!
//! Each zone exchanges heat with the envelope, with outdoor air through
//! wind-dependent infiltration, and with the AHU supply air in proportion to
//! the command gain. South-facing zones (the first half) collect solar gains.
//! The envelope loses heat to outdoors. Everything is linear in the
//! temperatures but bilinear in (gain, wind) x temperature, which is enough to
//! make a first-order fit only approximate.

pub mod weather;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use weather::{WeatherConfig, WeatherGenerator};

pub const ZONES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disturbances {
    /// Outdoor temperature, °C.
    pub t_out: f64,
    /// Outdoor humidity, %RH.
    pub h_out: f64,
    /// Wind speed, m/s.
    pub w_speed: f64,
    /// Solar irradiance, W/m².
    pub s_rad: f64,
    /// Solar energy since local midnight, Wh/m².
    pub s_energy: f64,
    /// Occupied fraction of the building, 0..1.
    pub occupancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuatorMode {
    Binary,
    Analog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhuCommand {
    gain: f64,
    mode: ActuatorMode,
}

impl AhuCommand {
    pub fn new(gain: f64, mode: ActuatorMode) -> Result<Self> {
        let ok = match mode {
            ActuatorMode::Binary => gain == 0.0 || gain == 1.0,
            ActuatorMode::Analog => (0.0..=1.0).contains(&gain),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "gain {gain} is not admissible in {mode:?} mode"
            )));
        }
        Ok(AhuCommand { gain, mode })
    }

    pub fn off() -> Self {
        AhuCommand {
            gain: 0.0,
            mode: ActuatorMode::Binary,
        }
    }

    pub fn on() -> Self {
        AhuCommand {
            gain: 1.0,
            mode: ActuatorMode::Binary,
        }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn mode(&self) -> ActuatorMode {
        self.mode
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub zone_temps: Vec<f64>,
    pub envelope_temp: f64,
    pub indoor_humidity: f64,
}

impl PlantState {
    pub fn uniform(temp: f64, humidity: f64) -> Self {
        PlantState {
            zone_temps: vec![temp; ZONES],
            envelope_temp: temp,
            indoor_humidity: humidity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zone_temps.len() != ZONES {
            return Err(Error::ShapeMismatch {
                expected: ZONES,
                got: self.zone_temps.len(),
            });
        }
        let in_range = |t: f64| t.is_finite() && (-30.0..=60.0).contains(&t);
        if !self.zone_temps.iter().copied().all(in_range)
            || !in_range(self.envelope_temp)
            || !self.indoor_humidity.is_finite()
        {
            return Err(Error::NonFiniteState);
        }
        Ok(())
    }

    pub fn mean_zone_temp(&self) -> f64 {
        self.zone_temps.iter().sum::<f64>() / self.zone_temps.len() as f64
    }
}

/// Lumped-parameter coefficients. Conductances in W/K, capacitances in J/K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantCoefficients {
    pub zone_capacitance: f64,
    /// Whole-building envelope capacitance.
    pub envelope_capacitance: f64,
    pub zone_envelope_conductance: f64,
    /// Whole-building envelope-to-outdoor conductance.
    pub envelope_outdoor_conductance: f64,
    pub infiltration_base: f64,
    pub infiltration_per_wind: f64,
    /// Zone-to-supply-air conductance at full AHU gain.
    pub ahu_conductance: f64,
    /// Supply air temperature, °C.
    pub supply_temp: f64,
    /// Effective solar aperture of a south zone, m².
    pub solar_aperture: f64,
    /// Internal gain per zone at full occupancy, W.
    pub occupancy_gain: f64,
    /// Relative spread of zone capacitances and AHU shares around nominal.
    pub zone_spread: f64,
    /// Indoor humidity relaxation time, minutes.
    pub humidity_tau: f64,
    /// Humidity added by the AHU spray at full gain, %RH per hour.
    pub spray_rate: f64,
    /// Whole minutes between an AHU command and its effect on the zones.
    pub transport_delay: f64,
}

impl Default for PlantCoefficients {
    fn default() -> Self {
        PlantCoefficients {
            zone_capacitance: 1.5e6,
            envelope_capacitance: 1.2e7,
            zone_envelope_conductance: 150.0,
            envelope_outdoor_conductance: 2400.0,
            infiltration_base: 21.0,
            infiltration_per_wind: 3.0,
            ahu_conductance: 220.0,
            supply_temp: 38.0,
            solar_aperture: 0.8,
            occupancy_gain: 150.0,
            zone_spread: 0.3,
            humidity_tau: 240.0,
            spray_rate: 2.0,
            transport_delay: 13.0,
        }
    }
}

impl PlantCoefficients {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("zone_capacitance", self.zone_capacitance),
            ("envelope_capacitance", self.envelope_capacitance),
            ("zone_envelope_conductance", self.zone_envelope_conductance),
            ("envelope_outdoor_conductance", self.envelope_outdoor_conductance),
            ("humidity_tau", self.humidity_tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("plant.{name} must be > 0")));
            }
        }
        let non_negative = [
            ("infiltration_base", self.infiltration_base),
            ("infiltration_per_wind", self.infiltration_per_wind),
            ("ahu_conductance", self.ahu_conductance),
            ("solar_aperture", self.solar_aperture),
            ("occupancy_gain", self.occupancy_gain),
            ("spray_rate", self.spray_rate),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("plant.{name} must be >= 0")));
            }
        }
        if !(0.0..=120.0).contains(&self.transport_delay) || self.transport_delay.fract() != 0.0 {
            return Err(Error::Config(
                "plant.transport_delay must be a whole number of minutes in [0, 120]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.zone_spread) {
            return Err(Error::Config("plant.zone_spread must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// The plant with its per-zone parameters resolved.
#[derive(Debug, Clone)]
pub struct Plant {
    coeffs: PlantCoefficients,
    capacitance: [f64; ZONES],
    ahu_conductance: [f64; ZONES],
    solar_aperture: [f64; ZONES],
}

impl Plant {
    pub fn new(coeffs: PlantCoefficients) -> Result<Self> {
        coeffs.validate()?;
        let mut capacitance = [0.0; ZONES];
        let mut ahu = [0.0; ZONES];
        let mut solar = [0.0; ZONES];
        for i in 0..ZONES {
            // Fixed pseudo-random pattern in [-1, 1]; duct runs and room sizes differ.
            let a = ((i * 7) % ZONES) as f64 / (ZONES - 1) as f64 * 2.0 - 1.0;
            let b = ((i * 11 + 5) % ZONES) as f64 / (ZONES - 1) as f64 * 2.0 - 1.0;
            capacitance[i] = coeffs.zone_capacitance * (1.0 + coeffs.zone_spread * a);
            ahu[i] = coeffs.ahu_conductance * (1.0 + coeffs.zone_spread * b);
            solar[i] = if i < ZONES / 2 { coeffs.solar_aperture } else { 0.0 };
        }
        Ok(Plant {
            coeffs,
            capacitance,
            ahu_conductance: ahu,
            solar_aperture: solar,
        })
    }

    pub fn coefficients(&self) -> &PlantCoefficients {
        &self.coeffs
    }

    fn infiltration(&self, dist: &Disturbances) -> f64 {
        self.coeffs.infiltration_base + self.coeffs.infiltration_per_wind * dist.w_speed.max(0.0)
    }

    fn zone_gain(&self, i: usize, dist: &Disturbances) -> f64 {
        self.solar_aperture[i] * dist.s_rad.max(0.0) + self.coeffs.occupancy_gain * dist.occupancy
    }

    /// Time derivatives in K/s for zones and envelope.
    fn derivatives(&self, zones: &[f64; ZONES], env: f64, gain: f64, dist: &Disturbances) -> ([f64; ZONES], f64) {
        let c = &self.coeffs;
        let inf = self.infiltration(dist);
        let mut dz = [0.0; ZONES];
        let mut to_env = 0.0;
        for i in 0..ZONES {
            let t = zones[i];
            let q_env = c.zone_envelope_conductance * (env - t);
            let q = q_env
                + inf * (dist.t_out - t)
                + gain * self.ahu_conductance[i] * (c.supply_temp - t)
                + self.zone_gain(i, dist);
            dz[i] = q / self.capacitance[i];
            to_env -= q_env;
        }
        let de = (to_env + c.envelope_outdoor_conductance * (dist.t_out - env)) / c.envelope_capacitance;
        (dz, de)
    }

    /// Advances the plant by `dt` minutes with RK4.
    pub fn step(&self, state: &PlantState, cmd: AhuCommand, dist: &Disturbances, dt: f64) -> Result<PlantState> {
        if !(dt > 0.0 && dt <= 5.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must lie in (0, 5] minutes, got {dt}"
            )));
        }
        state.validate()?;
        let g = cmd.gain();
        let h = dt * 60.0;
        let z0: [f64; ZONES] = state.zone_temps.as_slice().try_into().expect("validated length");
        let e0 = state.envelope_temp;

        let axpy = |z: &[f64; ZONES], k: &[f64; ZONES], s: f64| {
            let mut out = *z;
            for (o, d) in out.iter_mut().zip(k) {
                *o += s * d;
            }
            out
        };
        let (k1, l1) = self.derivatives(&z0, e0, g, dist);
        let (k2, l2) = self.derivatives(&axpy(&z0, &k1, h / 2.0), e0 + h / 2.0 * l1, g, dist);
        let (k3, l3) = self.derivatives(&axpy(&z0, &k2, h / 2.0), e0 + h / 2.0 * l2, g, dist);
        let (k4, l4) = self.derivatives(&axpy(&z0, &k3, h), e0 + h * l3, g, dist);
        let mut zones = z0;
        for i in 0..ZONES {
            zones[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let envelope_temp = e0 + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);

        // Relaxation toward outdoor humidity plus spray, exact over the step.
        let decay = (-dt / self.coeffs.humidity_tau).exp();
        let spray = g * self.coeffs.spray_rate * self.coeffs.humidity_tau / 60.0;
        let target = (dist.h_out + spray).clamp(0.0, 100.0);
        let indoor_humidity = (target + (state.indoor_humidity - target) * decay).clamp(0.0, 100.0);

        let next = PlantState {
            zone_temps: zones.to_vec(),
            envelope_temp,
            indoor_humidity,
        };
        next.validate()?;
        Ok(next)
    }

    /// Steady state under a constant gain and constant disturbances.
    pub fn equilibrium(&self, gain: f64, dist: &Disturbances) -> PlantState {
        let c = &self.coeffs;
        let inf = self.infiltration(dist);
        let ze = c.zone_envelope_conductance;
        // Zone i: T_i = (ze*T_e + inf*T_out + g*a_i*T_sup + Q_i) / S_i; substitute
        // into the envelope balance, which is then linear in T_e.
        let mut num = c.envelope_outdoor_conductance * dist.t_out;
        let mut den = c.envelope_outdoor_conductance;
        for i in 0..ZONES {
            let a = gain * self.ahu_conductance[i];
            let s = ze + inf + a;
            num += ze / s * (inf * dist.t_out + a * c.supply_temp + self.zone_gain(i, dist));
            den += ze * (inf + a) / s;
        }
        let env = num / den;
        let zone_temps = (0..ZONES)
            .map(|i| {
                let a = gain * self.ahu_conductance[i];
                (ze * env + inf * dist.t_out + a * c.supply_temp + self.zone_gain(i, dist)) / (ze + inf + a)
            })
            .collect();
        let spray = gain * c.spray_rate * c.humidity_tau / 60.0;
        PlantState {
            zone_temps,
            envelope_temp: env,
            indoor_humidity: (dist.h_out + spray).clamp(0.0, 100.0),
        }
    }
}

/// Clock-based baseline: full gain inside any `[start, stop)` window,
/// minutes after midnight.
pub fn clock_controller(time_of_day: f64, schedule: &[(f64, f64)]) -> AhuCommand {
    let on = schedule
        .iter()
        .any(|&(start, stop)| time_of_day >= start && time_of_day < stop);
    if on {
        AhuCommand::on()
    } else {
        AhuCommand::off()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos::{extract_params, Direction, TemperatureTrace};

    fn plant() -> Plant {
        Plant::new(PlantCoefficients::default()).unwrap()
    }

    fn calm(t_out: f64) -> Disturbances {
        Disturbances {
            t_out,
            h_out: 60.0,
            ..Default::default()
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = plant();
        let state = PlantState::uniform(15.0, 60.0);
        let next = p.step(&state, AhuCommand::off(), &calm(15.0), 5.0).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn command_validation() {
        assert!(AhuCommand::new(0.5, ActuatorMode::Binary).is_err());
        assert!(AhuCommand::new(1.0, ActuatorMode::Binary).is_ok());
        assert!(AhuCommand::new(0.5, ActuatorMode::Analog).is_ok());
        assert!(AhuCommand::new(1.5, ActuatorMode::Analog).is_err());
    }

    #[test]
    fn step_rejects_bad_dt_and_state() {
        let p = plant();
        let s = PlantState::uniform(18.0, 50.0);
        assert!(p.step(&s, AhuCommand::off(), &calm(5.0), 0.0).is_err());
        assert!(p.step(&s, AhuCommand::off(), &calm(5.0), 6.0).is_err());
        let mut bad = s.clone();
        bad.zone_temps[3] = f64::NAN;
        assert!(matches!(
            p.step(&bad, AhuCommand::off(), &calm(5.0), 1.0),
            Err(Error::NonFiniteState)
        ));
    }

    #[test]
    fn full_gain_warms_monotonically_to_a_plateau() {
        let p = plant();
        let mut s = PlantState::uniform(18.0, 50.0);
        let d = calm(5.0);
        let mut means = vec![s.mean_zone_temp()];
        for _ in 0..360 {
            s = p.step(&s, AhuCommand::on(), &d, 1.0).unwrap();
            means.push(s.mean_zone_temp());
        }
        assert!(means.windows(2).all(|w| w[1] >= w[0]));
        let last_hour_rise = means[360] - means[300];
        let first_hour_rise = means[60] - means[0];
        assert!(last_hour_rise < 0.25 * first_hour_rise);
    }

    #[test]
    fn more_sun_never_cools() {
        let p = plant();
        let s = PlantState::uniform(18.0, 50.0);
        let mut d = calm(5.0);
        d.s_rad = 200.0;
        let a = p.step(&s, AhuCommand::off(), &d, 5.0).unwrap();
        d.s_rad = 400.0;
        let b = p.step(&s, AhuCommand::off(), &d, 5.0).unwrap();
        assert!(b.mean_zone_temp() >= a.mean_zone_temp());
    }

    #[test]
    fn off_plant_converges_to_analytic_equilibrium_within_two_days() {
        let p = plant();
        let mut d = calm(3.0);
        d.w_speed = 4.0;
        d.occupancy = 0.5;
        d.s_rad = 100.0;
        let target = p.equilibrium(0.0, &d);
        let mut s = PlantState::uniform(22.0, 40.0);
        for _ in 0..(48 * 12) {
            s = p.step(&s, AhuCommand::off(), &d, 5.0).unwrap();
        }
        for (z, t) in s.zone_temps.iter().zip(&target.zone_temps) {
            assert!((z - t).abs() < 0.1, "zone {z} vs equilibrium {t}");
        }
    }

    #[test]
    fn deterministic_stepping() {
        let p = plant();
        let s = PlantState::uniform(18.0, 50.0);
        let d = calm(5.0);
        let a = p.step(&s, AhuCommand::on(), &d, 5.0).unwrap();
        let b = p.step(&s, AhuCommand::on(), &d, 5.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn open_loop_response_looks_first_order() {
        let p = plant();
        let d = calm(5.0);
        let mut s = p.equilibrium(0.0, &d);
        // Start from a lived-in building rather than the cold steady state.
        for t in s.zone_temps.iter_mut() {
            *t = 16.0;
        }
        s.envelope_temp = 13.0;
        let mut temps = vec![s.mean_zone_temp()];
        for _ in 0..1440 {
            s = p.step(&s, AhuCommand::on(), &d, 1.0).unwrap();
            temps.push(s.mean_zone_temp());
        }
        let trace = TemperatureTrace::new(0.0, 1.0, temps).unwrap();
        let fos = extract_params(&trace, Direction::Increasing, 0.0).unwrap();
        assert!((30.0..=480.0).contains(&fos.tau), "tau = {}", fos.tau);
        assert!(fos.kp > 3.0 && fos.kp < 25.0, "kp = {}", fos.kp);
    }

    #[test]
    fn clock_windows() {
        let w = [(360.0, 1260.0)];
        assert_eq!(clock_controller(420.0, &w).gain(), 1.0);
        assert_eq!(clock_controller(359.0, &w).gain(), 0.0);
        assert_eq!(clock_controller(1260.0, &w).gain(), 0.0);
        assert_eq!(clock_controller(420.0, &[]).gain(), 0.0);
    }
}
