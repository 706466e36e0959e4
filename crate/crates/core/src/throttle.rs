//! Bandwidth governance (token bucket over bytes) and per-host politeness.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use crate::clock::{Clock, Timestamp};

/// Seconds of budget the bucket can hold.
pub const BURST_SECONDS: f64 = 2.0;

/// Byte-rate limiter. Charges are taken after a transfer, letting the balance
/// go negative; the caller then waits until the debt is repaid. The bucket
/// starts empty and holds at most [`BURST_SECONDS`] of budget.
#[derive(Debug)]
pub struct TokenBucket {
    rate: Option<f64>,
    capacity: f64,
    state: Mutex<BucketState>,
}

#[derive(Debug, Default)]
struct BucketState {
    tokens: f64,
    last: Option<Timestamp>,
}

impl TokenBucket {
    /// `bytes_per_second = None` disables limiting.
    pub fn new(bytes_per_second: Option<u64>) -> Self {
        let rate = bytes_per_second.filter(|&r| r > 0).map(|r| r as f64);
        Self {
            rate,
            capacity: rate.map_or(0.0, |r| r * BURST_SECONDS),
            state: Mutex::new(BucketState::default()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    pub fn rate(&self) -> Option<f64> {
        self.rate
    }

    /// Delay owed for `bytes`, without sleeping.
    pub fn reserve(&self, bytes: u64, now: Timestamp) -> Duration {
        let Some(rate) = self.rate else {
            return Duration::ZERO;
        };
        let mut s = self.state.lock().unwrap();
        if let Some(last) = s.last {
            let refill = now.since(last).as_secs_f64() * rate;
            s.tokens = (s.tokens + refill).min(self.capacity);
        }
        s.last = Some(now.max(s.last.unwrap_or(now)));
        s.tokens -= bytes as f64;
        if s.tokens < 0.0 {
            Duration::from_secs_f64(-s.tokens / rate)
        } else {
            Duration::ZERO
        }
    }

    /// Charges `bytes` and sleeps on `clock` for whatever is owed.
    pub fn acquire(&self, bytes: u64, clock: &dyn Clock) -> Duration {
        let delay = self.reserve(bytes, clock.now());
        clock.sleep(delay);
        delay
    }
}

/// Minimum spacing between requests to the same host.
#[derive(Debug)]
pub struct Politeness {
    delay: Duration,
    next_slot: Mutex<HashMap<String, Timestamp>>,
}

impl Politeness {
    pub fn new(delay: Duration) -> Self {
        Self { delay, next_slot: Mutex::new(HashMap::new()) }
    }

    /// Reserves the host's next slot and sleeps until it arrives.
    pub fn wait(&self, host: &str, clock: &dyn Clock) -> Duration {
        if self.delay.is_zero() {
            return Duration::ZERO;
        }
        let now = clock.now();
        let wait = {
            let mut slots = self.next_slot.lock().unwrap();
            let slot = slots.get(host).copied().unwrap_or(now).max(now);
            slots.insert(host.to_string(), Timestamp::from_duration(slot.as_duration() + self.delay));
            slot.since(now)
        };
        clock.sleep(wait);
        wait
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;

    #[test]
    fn unlimited_adds_no_delay() {
        let clock = SimClock::new();
        let b = TokenBucket::unlimited();
        for _ in 0..100 {
            assert_eq!(b.acquire(1 << 20, &clock), Duration::ZERO);
        }
        assert_eq!(clock.now(), Timestamp(0));
    }

    #[test]
    fn hundred_kib_at_ten_kib_per_second_takes_ten_seconds() {
        let clock = SimClock::new();
        let b = TokenBucket::new(Some(10 * 1024));
        for _ in 0..10 {
            b.acquire(10 * 1024, &clock);
        }
        let secs = clock.elapsed().as_secs_f64();
        assert!(secs >= 9.99, "{secs}");
        assert!(secs <= 10.01, "{secs}");
    }

    #[test]
    fn idle_time_refills_at_most_capacity() {
        let clock = SimClock::new();
        let b = TokenBucket::new(Some(1000));
        b.acquire(0, &clock);
        clock.advance(Duration::from_secs(100));
        // 2s of budget banked, so 2000 bytes pass free and 1000 more cost 1s
        assert_eq!(b.acquire(2000, &clock), Duration::ZERO);
        let d = b.acquire(1000, &clock);
        assert!((d.as_secs_f64() - 1.0).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn politeness_spaces_same_host_only() {
        let clock = SimClock::new();
        let p = Politeness::new(Duration::from_secs(1));
        assert_eq!(p.wait("a", &clock), Duration::ZERO);
        assert_eq!(p.wait("b", &clock), Duration::ZERO);
        assert_eq!(p.wait("a", &clock), Duration::from_secs(1));
        assert_eq!(clock.now(), Timestamp(1000));
    }
}
