//! Time sources. Everything that waits or stamps goes through a [`Clock`] so
//! batch runs can use simulated time and stay bit-reproducible.

use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Milliseconds since the clock's epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_duration(d: Duration) -> Self {
        Timestamp(d.as_millis() as u64)
    }

    pub fn as_duration(self) -> Duration {
        Duration::from_millis(self.0)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Elapsed time from `earlier` to `self`, zero if `earlier` is later.
    pub fn since(self, earlier: Timestamp) -> Duration {
        Duration::from_millis(self.0.saturating_sub(earlier.0))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
    fn sleep(&self, d: Duration);
}

/// Wall-clock time measured from construction.
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_duration(self.start.elapsed())
    }

    fn sleep(&self, d: Duration) {
        if !d.is_zero() {
            std::thread::sleep(d);
        }
    }
}

/// Simulated clock: `sleep` advances time instantly. Sub-millisecond precision
/// is kept internally so many tiny sleeps still add up.
#[derive(Default)]
pub struct SimClock {
    nanos: Mutex<u128>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.nanos.lock().unwrap() += d.as_nanos();
    }

    pub fn elapsed(&self) -> Duration {
        let n = *self.nanos.lock().unwrap();
        Duration::from_nanos(n as u64)
    }
}

impl Clock for SimClock {
    fn now(&self) -> Timestamp {
        Timestamp((*self.nanos.lock().unwrap() / 1_000_000) as u64)
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}
