use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

/// Request body sent to a text-generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: usize,
    pub typical_p: f64,
    pub repetition_penalty: f64,
    pub max_new_tokens: usize,
    pub stop: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub completions: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {excerpt}")]
    Status { status: u16, excerpt: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

impl BackendError {
    /// Network failures, 5xx and 429 are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Malformed(_) => false,
        }
    }
}

/// Anything that turns a prompt into `n` raw completions.
pub trait GenerationBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError>;

    /// Short description recorded in run metadata.
    fn describe(&self) -> String;
}

pub(crate) fn excerpt(s: &str) -> String {
    const MAX: usize = 200;
    if s.len() <= MAX {
        return s.to_string();
    }
    let mut end = MAX;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}

/// JSON-over-HTTP generation client.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    auth: Option<(String, String)>,
}

impl HttpBackend {
    /// `url` is the full endpoint (base plus path). `auth` is an optional
    /// `(header name, header value)` pair.
    pub fn new(url: impl Into<String>, auth: Option<(String, String)>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
            auth,
        })
    }
}

impl GenerationBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let mut req = self.client.post(&self.url).json(request);
        if let Some((name, value)) = &self.auth {
            req = req.header(name.as_str(), value.as_str());
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                excerpt: excerpt(&body),
            });
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&body).map_err(|e| BackendError::Malformed(format!("{e}: {}", excerpt(&body))))?;
        Ok(parsed.completions)
    }

    fn describe(&self) -> String {
        format!("http {}", self.url)
    }
}
