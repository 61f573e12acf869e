//! Wall-clock injection.

use chrono::{DateTime, FixedOffset, Local, TimeDelta};
use parking_lot::Mutex;

pub trait Clock: Send + Sync {
    /// Current time in the offset used for anything spoken aloud.
    fn now(&self) -> DateTime<FixedOffset>;

    fn now_ms(&self) -> i64 {
        self.now().timestamp_millis()
    }
}

/// The host clock in the local timezone.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<FixedOffset> {
        Local::now().fixed_offset()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock {
    now: Mutex<DateTime<FixedOffset>>,
}

impl ManualClock {
    pub fn new(at: DateTime<FixedOffset>) -> Self {
        Self { now: Mutex::new(at) }
    }

    /// Parses an RFC 3339 timestamp such as `2024-05-01T14:05:00+05:30`.
    pub fn parse(iso: &str) -> Result<Self, chrono::ParseError> {
        DateTime::parse_from_rfc3339(iso).map(Self::new)
    }

    pub fn set(&self, at: DateTime<FixedOffset>) {
        *self.now.lock() = at;
    }

    pub fn advance(&self, by: TimeDelta) {
        let mut now = self.now.lock();
        *now += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<FixedOffset> {
        *self.now.lock()
    }
}
