//! Inclusive calendar-date intervals.

use std::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("window start {start} is after stop {stop}")]
pub struct InvalidWindow {
    pub start: NaiveDate,
    pub stop: NaiveDate,
}

/// `start..=stop`, serialized as `{"start": "YYYY-MM-DD", "stop": "YYYY-MM-DD"}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct TimeWindow {
    start: NaiveDate,
    stop: NaiveDate,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    start: NaiveDate,
    stop: NaiveDate,
}

impl TryFrom<RawWindow> for TimeWindow {
    type Error = InvalidWindow;
    fn try_from(r: RawWindow) -> Result<Self, InvalidWindow> {
        TimeWindow::new(r.start, r.stop)
    }
}

impl From<TimeWindow> for RawWindow {
    fn from(w: TimeWindow) -> Self {
        RawWindow {
            start: w.start,
            stop: w.stop,
        }
    }
}

impl TimeWindow {
    pub fn new(start: NaiveDate, stop: NaiveDate) -> Result<Self, InvalidWindow> {
        if start > stop {
            return Err(InvalidWindow { start, stop });
        }
        Ok(Self { start, stop })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn stop(&self) -> NaiveDate {
        self.stop
    }

    /// Number of calendar days covered, counting both ends.
    pub fn days(&self) -> i64 {
        (self.stop - self.start).num_days() + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.stop
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.days()).map(move |i| start + Duration::days(i))
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("window serializes")
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} to {}", self.start, self.stop)
    }
}
