//! Single-turn chat completion over remote endpoints or deterministic mocks.
//!
//! Every client is a [`ChatBackend`] wrapped in a [`RetryingClient`], which
//! owns the retry loop, the request-rate limiter and the in-flight semaphore.

mod http;
mod limits;
mod mock;
mod profile;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use http::HttpBackend;
pub use limits::{Clock, RateLimiter, Semaphore, SystemClock, VirtualClock, RATE_WINDOW};
pub use mock::{
    make_mock, prompt_hash, EchoBackend, MemorizedBackend, MockData, MockKind, RandomFixedBackend,
    ScriptStep, ScriptedBackend,
};
pub use profile::{load_profiles, ModelProfile, ProfileSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    /// 429, 5xx, network failures and timeouts are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network(_) | TransportError::Timeout => true,
            TransportError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("{model}: gave up after {attempts} attempts: {last}")]
    Exhausted {
        model: String,
        attempts: u32,
        last: TransportError,
    },
    #[error("{model}: non-retryable failure: {error}")]
    Rejected {
        model: String,
        error: TransportError,
    },
    #[error("model configuration: {0}")]
    Config(String),
}

/// One completed prompt/reply exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt: String,
    pub reply: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub attempt_count: u32,
    pub model_name: String,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// What the rest of the toolkit talks to.
pub trait ModelClient: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, prompt: &str) -> Result<ChatExchange, ModelError>;

    /// True when replies depend on call order (scripted mocks), which forces
    /// callers to issue requests sequentially.
    fn order_sensitive(&self) -> bool {
        false
    }
}

/// One raw request attempt.
pub trait ChatBackend: Send + Sync {
    fn send(&self, prompt: &str) -> Result<String, TransportError>;

    fn order_sensitive(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff with equal jitter: half the capped delay is fixed,
    /// the other half is drawn uniformly.
    pub fn backoff(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let exp = self
            .base_delay
            .saturating_mul(1u32.checked_shl(retry.min(20)).unwrap_or(u32::MAX));
        let capped = exp.min(self.max_delay);
        let half = capped / 2;
        let spread = (capped - half).as_nanos() as u64;
        let jitter = if spread == 0 {
            0
        } else {
            rng.random_range(0..=spread)
        };
        half + Duration::from_nanos(jitter)
    }
}

pub struct RetryingClient<B> {
    name: String,
    backend: B,
    policy: RetryPolicy,
    limiter: RateLimiter,
    in_flight: Semaphore,
    clock: Arc<dyn Clock>,
    jitter: Mutex<ChaCha8Rng>,
}

impl<B: ChatBackend> RetryingClient<B> {
    pub fn new(name: impl Into<String>, backend: B) -> Self {
        Self {
            name: name.into(),
            backend,
            policy: RetryPolicy::default(),
            limiter: RateLimiter::new(60),
            in_flight: Semaphore::new(1),
            clock: Arc::new(SystemClock::default()),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(0x5eed)),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: usize) -> Self {
        self.limiter = RateLimiter::new(requests_per_minute);
        self
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.in_flight = Semaphore::new(n);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }
}

impl<B: ChatBackend> ModelClient for RetryingClient<B> {
    fn name(&self) -> &str {
        &self.name
    }

    fn order_sensitive(&self) -> bool {
        self.backend.order_sensitive()
    }

    fn complete(&self, prompt: &str) -> Result<ChatExchange, ModelError> {
        if prompt.trim().is_empty() {
            return Err(ModelError::EmptyPrompt);
        }
        let _permit = self.in_flight.acquire();
        let started = self.clock.now();
        let mut attempts = 0u32;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            attempts += 1;
            match self.backend.send(prompt) {
                Ok(reply) => {
                    return Ok(ChatExchange {
                        prompt: prompt.to_string(),
                        reply,
                        latency: self.clock.now().saturating_sub(started),
                        attempt_count: attempts,
                        model_name: self.name.clone(),
                    })
                }
                Err(error) if !error.is_retryable() => {
                    return Err(ModelError::Rejected {
                        model: self.name.clone(),
                        error,
                    })
                }
                Err(last) if attempts > self.policy.max_retries => {
                    return Err(ModelError::Exhausted {
                        model: self.name.clone(),
                        attempts,
                        last,
                    })
                }
                Err(error) => {
                    let delay = {
                        let mut rng = self.jitter.lock().unwrap();
                        self.policy.backoff(attempts - 1, &mut *rng)
                    };
                    log::warn!(
                        "{}: attempt {attempts} failed ({error}); retrying in {:?}",
                        self.name,
                        delay
                    );
                    self.clock.sleep(delay);
                }
            }
        }
    }
}

impl<T: ModelClient + ?Sized> ModelClient for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, prompt: &str) -> Result<ChatExchange, ModelError> {
        (**self).complete(prompt)
    }

    fn order_sensitive(&self) -> bool {
        (**self).order_sensitive()
    }
}

impl<T: ModelClient + ?Sized> ModelClient for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, prompt: &str) -> Result<ChatExchange, ModelError> {
        (**self).complete(prompt)
    }

    fn order_sensitive(&self) -> bool {
        (**self).order_sensitive()
    }
}
