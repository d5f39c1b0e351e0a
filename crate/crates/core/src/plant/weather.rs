//! Synthetic weather: seasonal trend, diurnal cycle and seeded day-to-day noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Disturbances;
use crate::time::{SimTime, MINUTES_PER_DAY};

/// Weather samples are produced on this grid, minutes.
pub const WEATHER_STEP_MIN: i64 = 5;
pub const SAMPLES_PER_DAY: usize = (MINUTES_PER_DAY / WEATHER_STEP_MIN) as usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherConfig {
    /// Annual mean outdoor temperature, °C.
    pub mean_temp: f64,
    /// Half the summer/winter swing, °C.
    pub seasonal_amplitude: f64,
    /// Day-of-year of the coldest day.
    pub coldest_day: f64,
    /// Half the day/night swing, °C.
    pub diurnal_amplitude: f64,
    /// Std-dev of the daily mean offset, °C.
    pub daily_noise: f64,
    /// Std-dev of the within-day AR(1) noise, °C.
    pub hourly_noise: f64,
    pub mean_humidity: f64,
    pub mean_wind: f64,
    /// Clear-sky noon irradiance, W/m².
    pub peak_solar: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        WeatherConfig {
            mean_temp: 13.0,
            seasonal_amplitude: 10.0,
            coldest_day: 20.0,
            diurnal_amplitude: 4.0,
            daily_noise: 2.0,
            hourly_noise: 0.5,
            mean_humidity: 70.0,
            mean_wind: 3.0,
            peak_solar: 450.0,
            sunrise_hour: 7.0,
            sunset_hour: 17.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeatherGenerator {
    config: WeatherConfig,
    /// Calendar anchor for day index 0.
    epoch: SimTime,
}

impl WeatherGenerator {
    pub fn new(config: WeatherConfig, epoch: SimTime) -> Self {
        WeatherGenerator {
            config,
            epoch: epoch.start_of_day(),
        }
    }

    pub fn config(&self) -> &WeatherConfig {
        &self.config
    }

    /// Day index of the calendar day containing `t`.
    pub fn day_index(&self, t: SimTime) -> i64 {
        (t.start_of_day() - self.epoch).div_euclid(MINUTES_PER_DAY)
    }

    /// One day of disturbances on the 5-minute grid, starting at midnight.
    /// Occupancy is left at zero; the scenario overlays its schedule.
    pub fn generate(&self, seed: u64, day_index: i64) -> Vec<Disturbances> {
        let c = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, day_index as u64));
        let day_start = self.epoch + day_index * MINUTES_PER_DAY;
        let doy = f64::from(day_start.day_of_year());

        let seasonal = c.mean_temp - c.seasonal_amplitude * (2.0 * PI * (doy - c.coldest_day) / 365.0).cos();
        let daily_offset = c.daily_noise * gaussian(&mut rng);
        let cloudiness: f64 = rng.gen_range(0.0..0.8);
        let wind_mean = (c.mean_wind * (1.0 + 0.4 * gaussian(&mut rng))).max(0.0);
        let humidity_mean = (c.mean_humidity + 8.0 * gaussian(&mut rng)).clamp(20.0, 98.0);

        let mut ar = 0.0;
        let mut s_energy = 0.0;
        let step_h = WEATHER_STEP_MIN as f64 / 60.0;
        let mut out = Vec::with_capacity(SAMPLES_PER_DAY);
        for k in 0..SAMPLES_PER_DAY {
            let hour = k as f64 * step_h;
            ar = 0.97 * ar + c.hourly_noise * (1.0 - 0.97f64.powi(2)).sqrt() * gaussian(&mut rng);
            // Coldest at 03:00, warmest at 15:00.
            let diurnal = c.diurnal_amplitude * (2.0 * PI * (hour - 9.0) / 24.0).sin();
            let t_out = seasonal + daily_offset + diurnal + ar;

            let s_rad = if hour > c.sunrise_hour && hour < c.sunset_hour {
                let phase = (hour - c.sunrise_hour) / (c.sunset_hour - c.sunrise_hour);
                let flicker = 1.0 - 0.15 * rng.gen::<f64>() * cloudiness;
                c.peak_solar * (PI * phase).sin() * (1.0 - cloudiness) * flicker
            } else {
                0.0
            };
            let h_out = (humidity_mean - 1.5 * (t_out - seasonal) + 3.0 * gaussian(&mut rng)).clamp(0.0, 100.0);
            let w_speed = (wind_mean + 0.8 * gaussian(&mut rng)).max(0.0);

            out.push(Disturbances {
                t_out,
                h_out,
                w_speed,
                s_rad,
                s_energy,
                occupancy: 0.0,
            });
            s_energy += s_rad * step_h;
        }
        out
    }
}

/// SplitMix64 finalizer over a pair of words.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal via Box-Muller.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}
