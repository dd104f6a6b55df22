//! Client seams for every external model in the pipeline.
//!
//! All roles share one wire contract: `POST {base_url}/v1/{role}` with a
//! canonical JSON body, JSON response, optional bearer token read from an
//! environment variable. A [`BackendClient`] owns retry/backoff and the
//! per-endpoint in-flight limit; the byte transport underneath is pluggable
//! so the same client runs over HTTP ([`http::HttpTransport`]) or against the
//! in-process [`mock::MockBackend`].

pub mod api;
pub mod http;
pub mod mock;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use api::*;
pub use mock::{Corruption, MockBackend, MockFixtures, MockSample, MockVideo, VerifyMode};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generate,
    Judge,
    Embed,
    Asr,
    Ocr,
    Shots,
    Caption,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Generate,
        Role::Judge,
        Role::Embed,
        Role::Asr,
        Role::Ocr,
        Role::Shots,
        Role::Caption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Generate => "generate",
            Role::Judge => "judge",
            Role::Embed => "embed",
            Role::Asr => "asr",
            Role::Ocr => "ocr",
            Role::Shots => "shots",
            Role::Caption => "caption",
        }
    }

    pub fn path(self) -> String {
        format!("/v1/{}", self.as_str())
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| BackendError::Config(format!("unknown backend role `{s}`")))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("{role}: transport failure: {message}")]
    Transport { role: Role, message: String },
    #[error("{role}: request timed out")]
    Timeout { role: Role },
    #[error("{role}: HTTP status {code}")]
    BadStatus { role: Role, code: u16 },
    #[error("{role}: invalid response: {message}")]
    InvalidResponse { role: Role, message: String },
    #[error("{role}: invalid request: {message}")]
    InvalidRequest { role: Role, message: String },
    #[error("judge returned malformed scores: {0}")]
    MalformedScores(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Failures worth another attempt: transport errors, timeouts, 429 and 5xx.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } | BackendError::Timeout { .. } => true,
            BackendError::BadStatus { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Where and how to reach one backend role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_ms: 60_000,
            max_retries: 3,
            token_env: None,
        }
    }

    pub fn with_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn with_timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn with_token_env(mut self, var: impl Into<String>) -> Self {
        self.token_env = Some(var.into());
        self
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        if self.base_url.is_empty() {
            return Err(BackendError::Config("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn url(&self, role: Role) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), role.path())
    }

    fn bearer(&self) -> Option<String> {
        self.token_env.as_deref().and_then(|v| std::env::var(v).ok())
    }
}

/// Exponential backoff: `base · factor^(n−1)`, scaled by a uniform jitter in
/// `[1 − jitter, 1 + jitter]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(250),
            factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self {
            base: Duration::ZERO,
            factor: 2.0,
            jitter: 0.0,
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.base.as_secs_f64() * self.factor.powi(retry.saturating_sub(1) as i32);
        let scale = if self.jitter > 0.0 {
            1.0 + rng.random_range(-self.jitter..=self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * scale).max(0.0))
    }
}

/// Raw HTTP-level reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Connect(String),
    Timeout,
}

/// Moves bytes to an endpoint and back. Implementations must not alter the
/// request body.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        body: &[u8],
        bearer: Option<&str>,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure>;
}

/// Counting semaphore bounding concurrent requests to one endpoint.
#[derive(Debug)]
pub struct InFlightLimit {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut current = self.current.lock().expect("limiter lock");
        while *current >= self.max {
            current = self.freed.wait(current).expect("limiter lock");
        }
        *current += 1;
        InFlightPermit { limit: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.current.lock().expect("limiter lock")
    }

    pub fn max(&self) -> usize {
        self.max
    }
}

pub struct InFlightPermit<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        *self.limit.current.lock().expect("limiter lock") -= 1;
        self.limit.freed.notify_one();
    }
}

/// Response body plus the number of attempts it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub body: Vec<u8>,
    pub attempts: u32,
}

impl CallOutcome {
    pub fn retries(&self) -> u32 {
        self.attempts - 1
    }
}

/// One role's client. Cheap to clone; clones share the transport and the
/// in-flight limit.
#[derive(Clone)]
pub struct BackendClient {
    role: Role,
    endpoint: BackendEndpoint,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    limit: Arc<InFlightLimit>,
    embed_dim: Arc<std::sync::OnceLock<usize>>,
}

impl fmt::Debug for BackendClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendClient")
            .field("role", &self.role)
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl BackendClient {
    pub fn new(role: Role, endpoint: BackendEndpoint, transport: Arc<dyn Transport>) -> Result<Self, BackendError> {
        endpoint.check()?;
        Ok(Self {
            role,
            endpoint,
            transport,
            retry: RetryPolicy::default(),
            limit: Arc::new(InFlightLimit::new(DEFAULT_MAX_IN_FLIGHT)),
            embed_dim: Arc::new(std::sync::OnceLock::new()),
        })
    }

    /// HTTP client for `role` at `endpoint`.
    pub fn http(role: Role, endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        let transport = Arc::new(http::HttpTransport::new());
        Self::new(role, endpoint, transport)
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limit = Arc::new(InFlightLimit::new(max));
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    pub fn in_flight_limit(&self) -> &InFlightLimit {
        &self.limit
    }

    /// POSTs `body` unchanged, retrying retryable failures up to
    /// `max_retries` times.
    pub fn call(&self, body: &[u8]) -> Result<CallOutcome, BackendError> {
        let url = self.endpoint.url(self.role);
        let bearer = self.endpoint.bearer();
        let timeout = Duration::from_millis(self.endpoint.timeout_ms);
        let max_attempts = self.endpoint.max_retries + 1;
        let mut rng = rand::rng();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limit.acquire();
                self.transport.post(&url, body, bearer.as_deref(), timeout)
            };
            let err = match result {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return Ok(CallOutcome {
                        body: reply.body,
                        attempts: attempt,
                    })
                }
                Ok(reply) => BackendError::BadStatus {
                    role: self.role,
                    code: reply.status,
                },
                Err(TransportFailure::Timeout) => BackendError::Timeout { role: self.role },
                Err(TransportFailure::Connect(message)) => BackendError::Transport {
                    role: self.role,
                    message,
                },
            };
            if !err.is_retryable() || attempt >= max_attempts {
                return Err(err);
            }
            std::thread::sleep(self.retry.delay(attempt, &mut rng));
        }
    }

    /// Serializes `request` canonically, calls, and decodes the JSON reply.
    pub fn call_json<Req: Serialize, Resp: serde::de::DeserializeOwned>(
        &self,
        request: &Req,
    ) -> Result<(Resp, CallOutcome), BackendError> {
        let body = canonical_body(request);
        let outcome = self.call(&body)?;
        let resp = serde_json::from_slice(&outcome.body).map_err(|e| BackendError::InvalidResponse {
            role: self.role,
            message: e.to_string(),
        })?;
        Ok((resp, outcome))
    }
}

/// Canonical wire bytes for a request value.
pub fn canonical_body<T: Serialize>(request: &T) -> Vec<u8> {
    serde_json::to_vec(request).expect("request serializes")
}

/// One client per role.
#[derive(Debug, Clone)]
pub struct Backends {
    pub generate: BackendClient,
    pub judge: BackendClient,
    pub embed: BackendClient,
    pub asr: BackendClient,
    pub ocr: BackendClient,
    pub shots: BackendClient,
    pub caption: BackendClient,
}

impl Backends {
    /// Every role served by the same in-process mock.
    pub fn mock(mock: mock::MockBackend) -> Self {
        let transport: Arc<dyn Transport> = Arc::new(mock);
        Self::from_fn(|role| {
            BackendClient::new(role, BackendEndpoint::new(mock::MOCK_BASE_URL), transport.clone())
                .expect("mock endpoint is valid")
        })
    }

    pub fn from_fn(mut make: impl FnMut(Role) -> BackendClient) -> Self {
        Self {
            generate: make(Role::Generate),
            judge: make(Role::Judge),
            embed: make(Role::Embed),
            asr: make(Role::Asr),
            ocr: make(Role::Ocr),
            shots: make(Role::Shots),
            caption: make(Role::Caption),
        }
    }

    pub fn get(&self, role: Role) -> &BackendClient {
        match role {
            Role::Generate => &self.generate,
            Role::Judge => &self.judge,
            Role::Embed => &self.embed,
            Role::Asr => &self.asr,
            Role::Ocr => &self.ocr,
            Role::Shots => &self.shots,
            Role::Caption => &self.caption,
        }
    }

    pub fn set(&mut self, client: BackendClient) {
        let slot = match client.role {
            Role::Generate => &mut self.generate,
            Role::Judge => &mut self.judge,
            Role::Embed => &mut self.embed,
            Role::Asr => &mut self.asr,
            Role::Ocr => &mut self.ocr,
            Role::Shots => &mut self.shots,
            Role::Caption => &mut self.caption,
        };
        *slot = client;
    }
}
