//! Time source, request-rate limiting and retry backoff.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::Rng;

/// Wall-clock abstraction so rate limits and backoff can be tested
/// without sleeping.
pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Clock that only advances when slept on.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<u64>,
    slept: Mutex<Vec<Duration>>,
}

impl VirtualClock {
    pub fn starting_at(ms: u64) -> Self {
        VirtualClock {
            now: Mutex::new(ms),
            slept: Mutex::new(Vec::new()),
        }
    }

    pub fn advance(&self, duration: Duration) {
        *self.now.lock().unwrap() += duration.as_millis() as u64;
    }

    /// Every sleep requested so far.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.slept.lock().unwrap().push(duration);
        self.advance(duration);
    }
}

/// Sliding 60-second window admitting at most `per_minute` requests.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: usize,
    granted: Mutex<VecDeque<u64>>,
}

const WINDOW_MS: u64 = 60_000;

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        RateLimiter {
            per_minute: per_minute.max(1) as usize,
            granted: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks (via `clock`) until a request may start and returns its start
    /// time. Slots are reserved under the lock so concurrent callers never
    /// overshoot the cap.
    pub fn acquire(&self, clock: &dyn Clock) -> u64 {
        let start = {
            let mut granted = self.granted.lock().unwrap();
            let now = clock.now_ms();
            while granted.len() >= self.per_minute {
                let oldest = *granted.front().unwrap();
                if oldest + WINDOW_MS <= now {
                    granted.pop_front();
                } else {
                    break;
                }
            }
            let start = if granted.len() < self.per_minute {
                now
            } else {
                // the slot frees up once the request per_minute places back expires
                let idx = granted.len() - self.per_minute;
                (granted[idx] + WINDOW_MS).max(now)
            };
            granted.push_back(start);
            start
        };
        let now = clock.now_ms();
        if start > now {
            clock.sleep(Duration::from_millis(start - now));
        }
        start
    }
}

/// Exponential backoff with multiplicative jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub initial: Duration,
    pub factor: f64,
    /// Fractional jitter; 0.2 means each delay is scaled by a factor in [0.8, 1.2].
    pub jitter: f64,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            initial: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.2,
            cap: Duration::from_secs(60),
        }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (1-based).
    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let base = self.initial.as_secs_f64() * self.factor.powi(retry.saturating_sub(1) as i32);
        let base = base.min(self.cap.as_secs_f64());
        let scale = if self.jitter > 0.0 {
            rng.random_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((base * scale).min(self.cap.as_secs_f64()))
    }
}
