//! Minute-resolution simulation timestamps.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub const MINUTES_PER_DAY: i64 = 1440;

const FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Minutes since 1970-01-01T00:00, rendered as `YYYY-MM-DDTHH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub i64);

impl SimTime {
    pub fn from_date(date: NaiveDate) -> Self {
        let days = date.signed_duration_since(epoch()).num_days();
        SimTime(days * MINUTES_PER_DAY)
    }

    pub fn from_ymd_hm(y: i32, m: u32, d: u32, hh: u32, mm: u32) -> Self {
        let date = NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date");
        SimTime::from_date(date) + i64::from(hh * 60 + mm)
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn date(self) -> NaiveDate {
        epoch() + chrono::Duration::days(self.0.div_euclid(MINUTES_PER_DAY))
    }

    pub fn start_of_day(self) -> SimTime {
        SimTime(self.0 - self.minute_of_day())
    }

    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }

    pub fn is_aligned(self, grid: i64) -> bool {
        self.0.rem_euclid(grid) == 0
    }

    /// Day-of-year, 1-based.
    pub fn day_of_year(self) -> u32 {
        self.date().ordinal()
    }

    fn to_naive(self) -> NaiveDateTime {
        let mod_ = self.minute_of_day();
        self.date()
            .and_hms_opt((mod_ / 60) as u32, (mod_ % 60) as u32, 0)
            .expect("minute of day is in range")
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
}

impl std::ops::Add<i64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: i64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl std::ops::Sub<i64> for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: i64) -> SimTime {
        SimTime(self.0 - rhs)
    }
}

impl std::ops::Sub for SimTime {
    type Output = i64;
    fn sub(self, rhs: SimTime) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format(FORMAT))
    }
}

impl FromStr for SimTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = NaiveDateTime::parse_from_str(s, FORMAT).map_err(|e| Error::Parse(format!("timestamp {s:?}: {e}")))?;
        Ok(SimTime::from_date(dt.date()) + i64::from(dt.hour() * 60 + dt.minute()))
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `HH:MM` into minutes after midnight.
pub fn parse_clock(s: &str) -> Result<i64, Error> {
    let (h, m) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("clock time {s:?}: expected HH:MM")))?;
    let h: i64 = h
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("clock time {s:?}")))?;
    let m: i64 = m
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("clock time {s:?}")))?;
    if !(0..=24).contains(&h) || !(0..60).contains(&m) || h * 60 + m > MINUTES_PER_DAY {
        return Err(Error::Parse(format!("clock time {s:?} out of range")));
    }
    Ok(h * 60 + m)
}
