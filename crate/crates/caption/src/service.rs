//! Wire contract shared by every captioning service.
//!
//! ```text
//! POST <endpoint>
//! {"mode":"frame","inputs":["v1#120"]}
//! -> {"outputs":["a man rides a bike"],"model_id":"captioner-x"}
//! ```
//!
//! `frame` mode maps each input frame reference to one caption. `summarize`
//! mode receives the fine captions of one clip in order and returns a single
//! summary. Any non-2xx status is a failed attempt.

use std::sync::Arc;
use std::time::Duration;

use futures::future::BoxFuture;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stub::StubService;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Frame,
    Summarize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub mode: Mode,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceResponse {
    pub outputs: Vec<String>,
    pub model_id: String,
}

/// Why a single attempt failed.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CallError {
    #[error("timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("status {0}: {1}")]
    Status(u16, String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub trait CaptionService: Send + Sync {
    fn call(&self, request: ServiceRequest) -> BoxFuture<'_, Result<ServiceResponse, CallError>>;
}

pub struct HttpService {
    client: reqwest::Client,
    url: String,
}

impl HttpService {
    pub fn new(url: impl Into<String>) -> HttpService {
        HttpService { client: reqwest::Client::new(), url: url.into() }
    }
}

impl CaptionService for HttpService {
    fn call(&self, request: ServiceRequest) -> BoxFuture<'_, Result<ServiceResponse, CallError>> {
        Box::pin(async move {
            let resp = self
                .client
                .post(&self.url)
                .json(&request)
                .send()
                .await
                .map_err(|e| CallError::Transport(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                let body = resp.text().await.unwrap_or_default();
                return Err(CallError::Status(status.as_u16(), body));
            }
            resp.json::<ServiceResponse>().await.map_err(|e| CallError::Malformed(e.to_string()))
        })
    }
}

/// `stub://<name>` gives an in-process [`StubService::describer`];
/// `http://` and `https://` give an [`HttpService`].
pub fn service_for_endpoint(endpoint: &str) -> Result<Arc<dyn CaptionService>, String> {
    if let Some(name) = endpoint.strip_prefix("stub://") {
        if name.is_empty() {
            return Err("stub endpoint needs a name, e.g. stub://fine".into());
        }
        return Ok(Arc::new(StubService::describer(name)));
    }
    if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        return Ok(Arc::new(HttpService::new(endpoint)));
    }
    Err(format!("unsupported endpoint {endpoint:?}"))
}

pub(crate) fn millis(ms: u64) -> Duration {
    Duration::from_millis(ms)
}
