use std::time::Duration;

use super::{BackendError, Route, Transport};

/// JSON-over-HTTP POST transport. The route picks the path under `base_url`.
pub struct HttpTransport {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpTransport {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

impl Transport for HttpTransport {
    fn call(
        &self,
        route: Route,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, BackendError> {
        let url = format!("{}{}", self.base_url, route.path());
        let resp = self
            .client
            .post(&url)
            .json(body)
            .timeout(timeout)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout(timeout)
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("{url} answered {status}")));
        }
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(timeout)
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed(format!("{url}: {e}")))
    }
}
