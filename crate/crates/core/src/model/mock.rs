use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ModelClient, RetryPolicy, RetryingClient, TransportError, VirtualClock};

/// Hex SHA-256 of a prompt, the key memorized mocks look replies up by.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    Echo,
    Scripted,
    Memorized,
    RandomFixed,
}

#[derive(Debug, Default)]
pub struct EchoBackend;

impl ChatBackend for EchoBackend {
    fn send(&self, prompt: &str) -> Result<String, TransportError> {
        Ok(prompt.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Reply(String),
    Fail(TransportError),
}

/// Plays back its steps in call order; the last step repeats once the script runs out.
#[derive(Debug)]
pub struct ScriptedBackend {
    steps: Vec<ScriptStep>,
    cursor: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        Self {
            steps,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            replies
                .into_iter()
                .map(|r| ScriptStep::Reply(r.into()))
                .collect(),
        )
    }

    pub fn calls(&self) -> usize {
        self.cursor.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, _prompt: &str) -> Result<String, TransportError> {
        let i = self.cursor.fetch_add(1, Ordering::SeqCst);
        let step = self
            .steps
            .get(i)
            .or(self.steps.last())
            .ok_or_else(|| TransportError::Malformed("empty script".into()))?;
        match step {
            ScriptStep::Reply(r) => Ok(r.clone()),
            ScriptStep::Fail(e) => Err(e.clone()),
        }
    }

    fn order_sensitive(&self) -> bool {
        true
    }
}

/// Replies from a fixed table keyed by prompt hash (or the raw prompt).
#[derive(Debug, Clone, Default)]
pub struct MemorizedBackend {
    memory: BTreeMap<String, String>,
    default_reply: String,
}

impl MemorizedBackend {
    pub fn new(memory: BTreeMap<String, String>, default_reply: impl Into<String>) -> Self {
        Self {
            memory,
            default_reply: default_reply.into(),
        }
    }

    pub fn remember(&mut self, prompt: &str, reply: impl Into<String>) {
        self.memory.insert(prompt_hash(prompt), reply.into());
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    fn lookup(&self, prompt: &str) -> Option<&String> {
        self.memory
            .get(&prompt_hash(prompt))
            .or_else(|| self.memory.get(prompt))
    }
}

impl ChatBackend for MemorizedBackend {
    fn send(&self, prompt: &str) -> Result<String, TransportError> {
        Ok(self
            .lookup(prompt)
            .cloned()
            .unwrap_or_else(|| self.default_reply.clone()))
    }
}

/// Always answers the same nonsense token drawn from `seed`.
#[derive(Debug, Clone)]
pub struct RandomFixedBackend {
    token: String,
}

impl RandomFixedBackend {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body: String = (0..10)
            .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
            .collect();
        Self {
            token: format!("qx{body}"),
        }
    }

    pub fn token(&self) -> &str {
        &self.token
    }
}

impl ChatBackend for RandomFixedBackend {
    fn send(&self, _prompt: &str) -> Result<String, TransportError> {
        Ok(self.token.clone())
    }
}

/// Inputs for [`make_mock`]; each kind reads only the fields it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockData {
    /// `scripted`: replies in call order.
    pub replies: Vec<String>,
    /// `memorized`: prompt hash (or raw prompt) to reply.
    pub memory: BTreeMap<String, String>,
    /// `memorized`: reply on lookup miss.
    pub default_reply: String,
    /// `random_fixed`: seed of the constant token.
    pub seed: u64,
}

fn offline<B: ChatBackend>(name: &str, backend: B) -> RetryingClient<B> {
    RetryingClient::new(name, backend)
        .with_policy(RetryPolicy {
            max_retries: 0,
            ..RetryPolicy::default()
        })
        .with_rate_limit(usize::MAX)
        .with_max_concurrency(usize::MAX)
        .with_clock(Arc::new(VirtualClock::new()))
}

/// Deterministic network-free client of the given kind.
pub fn make_mock(kind: MockKind, data: &MockData) -> Box<dyn ModelClient> {
    match kind {
        MockKind::Echo => Box::new(offline("mock:echo", EchoBackend)),
        MockKind::Scripted => Box::new(offline(
            "mock:scripted",
            ScriptedBackend::replies(data.replies.iter().cloned()),
        )),
        MockKind::Memorized => Box::new(offline(
            "mock:memorized",
            MemorizedBackend::new(data.memory.clone(), data.default_reply.clone()),
        )),
        MockKind::RandomFixed => Box::new(offline(
            "mock:random_fixed",
            RandomFixedBackend::new(data.seed),
        )),
    }
}
