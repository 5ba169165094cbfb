use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::service::{millis, service_for_endpoint, CallError, CaptionService, ServiceRequest, ServiceResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionServiceSpec {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for CaptionServiceSpec {
    fn default() -> Self {
        CaptionServiceSpec {
            endpoint: String::new(),
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_base_ms: 200,
            max_in_flight: 8,
        }
    }
}

impl CaptionServiceSpec {
    pub fn new(endpoint: impl Into<String>) -> CaptionServiceSpec {
        CaptionServiceSpec { endpoint: endpoint.into(), ..CaptionServiceSpec::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.timeout_ms == 0 {
            return Err("timeout_ms must be positive".into());
        }
        if self.max_retries > 30 {
            return Err(format!("max_retries {} is unreasonably large", self.max_retries));
        }
        Ok(())
    }

    /// Wait before retry number `k` (0-based): `backoff_base_ms * 2^k`.
    pub fn backoff_ms(&self, k: u32) -> u64 {
        self.backoff_base_ms.saturating_mul(1u64 << k.min(62))
    }
}

/// A request that failed on every attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceFailure {
    pub endpoint: String,
    pub attempts: u32,
    pub last: CallError,
}

/// One service endpoint with its retry policy and in-flight limit.
#[derive(Clone)]
pub struct ServiceClient {
    spec: CaptionServiceSpec,
    service: Arc<dyn CaptionService>,
    permits: Arc<Semaphore>,
}

impl ServiceClient {
    pub fn new(spec: CaptionServiceSpec, service: Arc<dyn CaptionService>) -> Result<ServiceClient, String> {
        spec.validate()?;
        let permits = Arc::new(Semaphore::new(spec.max_in_flight));
        Ok(ServiceClient { spec, service, permits })
    }

    pub fn from_spec(spec: CaptionServiceSpec) -> Result<ServiceClient, String> {
        let service = service_for_endpoint(&spec.endpoint)?;
        ServiceClient::new(spec, service)
    }

    pub fn spec(&self) -> &CaptionServiceSpec {
        &self.spec
    }

    /// Sends `request` until it succeeds or `max_retries` retries are spent.
    /// A response with the wrong number of outputs counts as a failed attempt.
    pub async fn request(&self, request: ServiceRequest, expected_outputs: usize) -> Result<ServiceResponse, ServiceFailure> {
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.permits.acquire().await.expect("semaphore never closes");
                match tokio::time::timeout(millis(self.spec.timeout_ms), self.service.call(request.clone())).await {
                    Err(_) => Err(CallError::Timeout),
                    Ok(Ok(r)) if r.outputs.len() != expected_outputs => Err(CallError::Malformed(format!(
                        "expected {expected_outputs} outputs, got {}",
                        r.outputs.len()
                    ))),
                    Ok(r) => r,
                }
            };
            match result {
                Ok(r) => return Ok(r),
                Err(last) if attempt >= self.spec.max_retries => {
                    return Err(ServiceFailure { endpoint: self.spec.endpoint.clone(), attempts: attempt + 1, last });
                }
                Err(_) => {
                    tokio::time::sleep(millis(self.spec.backoff_ms(attempt))).await;
                    attempt += 1;
                }
            }
        }
    }
}
