//! Clocks, request-rate limiting and the in-flight semaphore.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

pub const RATE_WINDOW: Duration = Duration::from_secs(60);

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Time only moves when someone sleeps.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Token bucket of `per_minute` tokens where each spent token returns to the
/// bucket exactly one window after it was taken. Over any half-open 60 s
/// window at most `per_minute` requests are admitted.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: usize,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(per_minute: usize) -> Self {
        Self {
            per_minute: per_minute.max(1),
            issued: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(&self) -> usize {
        self.per_minute
    }

    /// Blocks (via `clock`) until a request may be issued, then records it.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        if self.per_minute == usize::MAX {
            return clock.now();
        }
        loop {
            let wait = {
                let mut issued = self.issued.lock().unwrap();
                let now = clock.now();
                while issued.front().is_some_and(|&t| t + RATE_WINDOW <= now) {
                    issued.pop_front();
                }
                if issued.len() < self.per_minute {
                    issued.push_back(now);
                    return now;
                }
                issued[0] + RATE_WINDOW - now
            };
            clock.sleep(wait);
        }
    }
}

/// Counting semaphore bounding concurrent in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    available: Mutex<usize>,
    cond: Condvar,
}

pub struct Permit<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            cond: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.cond.wait(n).unwrap();
        }
        *n -= 1;
        Permit { sem: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.sem.available.lock().unwrap() += 1;
        self.sem.cond.notify_one();
    }
}
