use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SECONDS_PER_DAY: i64 = 86_400;

/// A UTC instant with second resolution, stored as seconds since the Unix epoch.
///
/// Serialized as ISO-8601 with a trailing `Z`, e.g. `2019-08-01T00:00:00Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_date(date: NaiveDate) -> Self {
        let dt = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
        Timestamp(dt.and_utc().timestamp())
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    /// Calendar day (UTC) this instant falls on.
    pub fn date(self) -> NaiveDate {
        DateTime::<Utc>::from_timestamp(self.0.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY, 0)
            .expect("timestamp in chrono range")
            .date_naive()
    }

    pub fn is_midnight(self) -> bool {
        self.0.rem_euclid(SECONDS_PER_DAY) == 0
    }

    pub fn is_on_the_hour(self) -> bool {
        self.0.rem_euclid(3_600) == 0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::<Utc>::from_timestamp(self.0, 0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%SZ")),
            None => write!(f, "@{}", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ISO-8601 UTC timestamp `{0}`")]
pub struct TimestampParseError(pub String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(trimmed) {
            if dt.offset().local_minus_utc() != 0 {
                return Err(TimestampParseError(s.to_string()));
            }
            if dt.timestamp_subsec_nanos() != 0 {
                return Err(TimestampParseError(s.to_string()));
            }
            return Ok(Timestamp(dt.timestamp()));
        }
        // Bare dates are accepted for convenience in query strings.
        NaiveDate::parse_from_str(trimmed, "%Y-%m-%d")
            .map(Timestamp::from_date)
            .map_err(|_| TimestampParseError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Period { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn contains_instant(&self, ts: Timestamp) -> bool {
        self.contains(ts.date())
    }
}

/// A value attached to a calendar date, serialized as `[iso_date, value]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatedValue(pub NaiveDate, pub f64);

impl DatedValue {
    pub fn date(&self) -> NaiveDate {
        self.0
    }

    pub fn value(&self) -> f64 {
        self.1
    }
}

/// A value attached to an instant, serialized as `[iso_timestamp, value]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedValue(pub Timestamp, pub f64);

impl TimedValue {
    pub fn timestamp(&self) -> Timestamp {
        self.0
    }

    pub fn value(&self) -> f64 {
        self.1
    }
}
