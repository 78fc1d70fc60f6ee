use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    make_mock, HttpBackend, MockData, MockKind, ModelClient, ModelError, RetryPolicy,
    RetryingClient, SystemClock,
};

fn one() -> usize {
    1
}
fn sixty() -> usize {
    60
}
fn default_timeout() -> f64 {
    60.0
}
fn three() -> u32 {
    3
}

/// Connection settings for one model. Secrets are referenced by environment
/// variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Model name sent on the wire; defaults to `name`.
    #[serde(default)]
    pub model: Option<String>,
    /// Defaults to `LEAKPROBE_API_KEY_<NAME>`.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "one")]
    pub max_concurrency: usize,
    #[serde(default = "sixty")]
    pub requests_per_minute: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "three")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub mock: Option<MockKind>,
    #[serde(default)]
    pub mock_data: MockData,
}

impl ModelProfile {
    pub fn mock(kind: MockKind, data: MockData) -> Self {
        let name = format!(
            "mock:{}",
            serde_json::to_value(kind)
                .unwrap()
                .as_str()
                .unwrap_or("mock")
        );
        Self {
            name,
            endpoint: None,
            model: None,
            auth_env: None,
            max_concurrency: 1,
            requests_per_minute: 60,
            timeout_secs: default_timeout(),
            max_retries: 0,
            temperature: 0.0,
            mock: Some(kind),
            mock_data: data,
        }
    }

    pub fn auth_env_name(&self) -> String {
        self.auth_env.clone().unwrap_or_else(|| {
            let suffix: String = self
                .name
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() {
                        c.to_ascii_uppercase()
                    } else {
                        '_'
                    }
                })
                .collect();
            format!("LEAKPROBE_API_KEY_{suffix}")
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(format!("profile {:?}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty name");
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be >= 1");
        }
        if self.requests_per_minute == 0 {
            return bad("requests_per_minute must be >= 1");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return bad("timeout_secs must be > 0");
        }
        match (&self.endpoint, &self.mock) {
            (Some(_), Some(_)) => bad("set either endpoint or mock, not both"),
            (None, None) => bad("needs an endpoint or a mock kind"),
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn ModelClient>, ModelError> {
        self.validate()?;
        if let Some(kind) = self.mock {
            return Ok(make_mock(kind, &self.mock_data));
        }
        let endpoint = self.endpoint.clone().unwrap_or_default();
        let backend = HttpBackend::new(
            endpoint,
            self.model.clone().unwrap_or_else(|| self.name.clone()),
            self.temperature,
            self.auth_env_name(),
            Duration::from_secs_f64(self.timeout_secs),
        );
        Ok(Box::new(
            RetryingClient::new(self.name.clone(), backend)
                .with_policy(RetryPolicy {
                    max_retries: self.max_retries,
                    ..RetryPolicy::default()
                })
                .with_rate_limit(self.requests_per_minute)
                .with_max_concurrency(self.max_concurrency)
                .with_clock(Arc::new(SystemClock::default())),
        ))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    #[serde(default, rename = "profile")]
    pub profiles: Vec<ModelProfile>,
}

impl ProfileSet {
    /// Looks `name` up among the configured profiles, then among the
    /// built-in `mock:<kind>` names.
    pub fn resolve(&self, name: &str) -> Result<ModelProfile, ModelError> {
        if let Some(p) = self.profiles.iter().find(|p| p.name == name) {
            return Ok(p.clone());
        }
        let kind = match name {
            "mock:echo" => MockKind::Echo,
            "mock:scripted" => MockKind::Scripted,
            "mock:memorized" => MockKind::Memorized,
            "mock:random_fixed" => MockKind::RandomFixed,
            _ => {
                return Err(ModelError::Config(format!(
                    "unknown model profile {name:?}"
                )))
            }
        };
        Ok(ModelProfile::mock(kind, MockData::default()))
    }
}

/// Reads `[[profile]]` tables from TOML, or `{"profile": [...]}` from a `.json` file.
pub fn load_profiles(path: &Path) -> Result<ProfileSet, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
    let set: ProfileSet = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| ModelError::Config(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| ModelError::Config(e.to_string()))?
    };
    for p in &set.profiles {
        p.validate()?;
    }
    Ok(set)
}
