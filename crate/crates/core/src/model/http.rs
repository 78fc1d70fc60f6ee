use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, TransportError};

/// Chat-completions JSON over HTTP: one user message, bearer auth read from
/// an environment variable at request time.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    temperature: f64,
    auth_env: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("auth_env", &self.auth_env)
            .finish()
    }
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        auth_env: impl Into<String>,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
            model: model.into(),
            temperature,
            auth_env: auth_env.into(),
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        })
    }
}

pub(crate) fn extract_reply(body: &str) -> Result<String, TransportError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Malformed("no choices[0].message.content".into()))
}

fn map_error(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::StatusCode(status) => TransportError::Status {
            status,
            body: String::new(),
        },
        ureq::Error::Timeout(_) => TransportError::Timeout,
        other => TransportError::Network(other.to_string()),
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, prompt: &str) -> Result<String, TransportError> {
        let mut request = self.agent.post(&self.endpoint);
        if let Ok(key) = std::env::var(&self.auth_env) {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(self.request_body(prompt))
            .map_err(map_error)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(map_error)?;
        if !(200..300).contains(&status) {
            let mut body = body;
            body.truncate(512);
            return Err(TransportError::Status { status, body });
        }
        extract_reply(&body)
    }
}
