//! Blocking JSON-over-HTTP client shared by the remote generator and the
//! remote embedder.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HttpError {
    /// Connection-level failure that persisted through every retry.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("undecodable response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// First backoff; doubles per retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_millis(200) }
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    base_url: String,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(base_url: &str, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent, base_url: base_url.trim_end_matches('/').to_string(), retry }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, HttpError> {
        let url = format!("{}{}", self.base_url, path);
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status != 200 {
                        let text = resp.body_mut().read_to_string().unwrap_or_default();
                        return Err(HttpError::Status { status, body: text });
                    }
                    return resp
                        .body_mut()
                        .with_config()
                        .limit(256 * 1024 * 1024)
                        .read_json::<Resp>()
                        .map_err(|e| HttpError::Decode(e.to_string()));
                }
                Err(e) => {
                    if attempt > self.retry.max_retries {
                        return Err(HttpError::Transport { attempts: attempt, message: e.to_string() });
                    }
                    thread::sleep(self.retry.base_delay * 2u32.saturating_pow(attempt - 1));
                }
            }
        }
    }
}
