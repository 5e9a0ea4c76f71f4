//! Time and run-id sources.
//!
//! Everything that stamps a trace, report or feedback record reads time through
//! [`Clock`], so a run can be replayed byte-for-byte with [`FixedClock`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock frozen at one instant. Durations measured against it are zero.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl FixedClock {
    pub fn epoch() -> Self {
        Self(Utc.with_ymd_and_hms(2024, 7, 1, 0, 0, 0).unwrap())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Clock that advances by a fixed step on every read.
#[derive(Debug)]
pub struct SteppingClock {
    current: Mutex<DateTime<Utc>>,
    step: chrono::Duration,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: chrono::Duration) -> Self {
        Self {
            current: Mutex::new(start),
            step,
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let mut current = self.current.lock().unwrap();
        let now = *current;
        *current = now + self.step;
        now
    }
}

/// Source of fresh run identifiers.
pub trait RunIds: Send + Sync {
    fn next_id(&self) -> String;
}

#[derive(Debug, Default)]
pub struct UuidRunIds;

impl RunIds for UuidRunIds {
    fn next_id(&self) -> String {
        uuid::Uuid::new_v4().to_string()
    }
}

/// `prefix-0001`, `prefix-0002`, ...
#[derive(Debug)]
pub struct SequentialRunIds {
    prefix: String,
    counter: AtomicU64,
}

impl SequentialRunIds {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            counter: AtomicU64::new(0),
        }
    }
}

impl RunIds for SequentialRunIds {
    fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        format!("{}-{:04}", self.prefix, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stepping_clock_advances() {
        let clock = SteppingClock::new(FixedClock::epoch().0, chrono::Duration::seconds(1));
        let a = clock.now();
        let b = clock.now();
        assert_eq!(b - a, chrono::Duration::seconds(1));
    }

    #[test]
    fn sequential_ids_are_padded() {
        let ids = SequentialRunIds::new("run");
        assert_eq!(ids.next_id(), "run-0001");
        assert_eq!(ids.next_id(), "run-0002");
    }
}
