//! Completion backends.
//!
//! A [`CompletionBackend`] turns a rendered prompt into raw text. Two
//! backends ship: [`HostedChatBackend`] speaks the common JSON chat-completion
//! protocol over HTTP, and [`MockBackend`] samples ratings from a seeded
//! [`MockAnnotatorProfile`]. [`Gateway`] wraps either one with a cap on
//! in-flight requests and token-bucket pacing.

mod hosted;
mod limiter;
mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hosted::HostedChatBackend;
pub use limiter::RateLimiter;
pub use mock::{mock_complete, sharpen, CellDistribution, MockAnnotatorProfile, MockBackend};

use crate::prompt::PromptSpec;

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
/// Low-temperature preset for annotation work.
pub const LOW_TEMPERATURE: f64 = 0.25;
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("authentication rejected by {endpoint} (HTTP {status})")]
    Auth { status: u16, endpoint: String },
    #[error("{endpoint} still failing after {attempts} attempts: {last_error}")]
    RetriesExhausted {
        attempts: u32,
        endpoint: String,
        last_error: String,
    },
    #[error("{endpoint} timed out after {attempts} attempts")]
    Timeout { attempts: u32, endpoint: String },
    #[error("malformed response from {endpoint}: {detail}")]
    MalformedResponse { endpoint: String, detail: String },
    #[error("{endpoint} rejected the request (HTTP {status}): {body}")]
    Api {
        status: u16,
        endpoint: String,
        body: String,
    },
    #[error("mock profile has no distribution for review {review_id:?}, variable {variable:?}")]
    MissingCell { review_id: String, variable: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// The endpoint involved, when the failure came from a remote service.
    pub fn endpoint(&self) -> Option<&str> {
        match self {
            GatewayError::Auth { endpoint, .. }
            | GatewayError::RetriesExhausted { endpoint, .. }
            | GatewayError::Timeout { endpoint, .. }
            | GatewayError::MalformedResponse { endpoint, .. }
            | GatewayError::Api { endpoint, .. } => Some(endpoint),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    HostedChat,
    Mock,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hosted-chat" | "hosted" => Ok(ProviderKind::HostedChat),
            "mock" => Ok(ProviderKind::Mock),
            other => Err(format!("unknown provider {other:?} (expected hosted-chat or mock)")),
        }
    }
}

fn default_model() -> String {
    "gpt-4".into()
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff() -> Vec<u64> {
    vec![1_000, 2_000, 4_000]
}
fn default_timeout() -> u64 {
    60_000
}
fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}
fn default_in_flight() -> usize {
    4
}
fn default_rps() -> f64 {
    5.0
}
fn default_spread() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Extra attempts after the first one for transient failures.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Delay before retry `i` is `backoff_ms[min(i, len - 1)]`.
    #[serde(default = "default_backoff")]
    pub backoff_ms: Vec<u64>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_base_url")]
    pub base_url: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_rps")]
    pub requests_per_second: f64,
    /// Seed for the mock backend's sampling stream.
    #[serde(default)]
    pub seed: u64,
    /// Spread of synthetic mock distributions; larger is more uncertain.
    #[serde(default = "default_spread")]
    pub mock_spread: f64,
    /// JSON mock profile to use instead of a synthetic one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_profile: Option<std::path::PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ProviderConfig {
    pub fn mock(seed: u64, temperature: f64) -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            model: "mock".into(),
            temperature,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let err = |m: &str| Err(GatewayError::Config(m.to_string()));
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return err("temperature must be a finite number >= 0");
        }
        if self.timeout_ms == 0 {
            return err("timeout_ms must be > 0");
        }
        if self.max_in_flight == 0 {
            return err("max_in_flight must be >= 1");
        }
        if !(self.requests_per_second.is_finite() && self.requests_per_second > 0.0) {
            return err("requests_per_second must be > 0");
        }
        if self.model.trim().is_empty() {
            return err("model must not be empty");
        }
        if !(self.mock_spread.is_finite() && self.mock_spread > 0.0) {
            return err("mock_spread must be > 0");
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn backoff_before_retry(&self, retry: u32) -> Duration {
        match self.backoff_ms.len() {
            0 => Duration::ZERO,
            n => Duration::from_millis(self.backoff_ms[(retry as usize).min(n - 1)]),
        }
    }

    pub fn endpoint(&self) -> String {
        match self.kind {
            ProviderKind::HostedChat => {
                format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
            }
            ProviderKind::Mock => "mock://local".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletionRequest {
    pub system: Option<String>,
    pub user: String,
    /// Identity of the rated review; the mock backend keys its distributions
    /// on it.
    pub review_id: String,
    /// Which repetition this is; the mock derives its sampling stream from it.
    pub draw_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletionResult {
    pub raw_text: String,
    pub model: String,
    pub request_id: String,
    pub latency: Duration,
    /// Always at least 1.
    pub attempt_count: u32,
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    /// Where requests go, for diagnostics.
    fn endpoint(&self) -> String;
    fn model(&self) -> &str;
    fn temperature(&self) -> f64;
    async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError>;
}

/// A backend behind a concurrency cap and a request pacer.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    limiter: Arc<RateLimiter>,
    requests: Arc<AtomicU64>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>, limiter: RateLimiter) -> Self {
        Gateway {
            backend,
            limiter: Arc::new(limiter),
            requests: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Builds the backend described by `cfg`. The mock uses the profile at
    /// `cfg.mock_profile` if set, otherwise a synthetic one seeded by
    /// `cfg.seed`.
    pub fn from_config(cfg: &ProviderConfig, spec: &PromptSpec) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let backend: Arc<dyn CompletionBackend> = match cfg.kind {
            ProviderKind::HostedChat => Arc::new(HostedChatBackend::from_env(cfg.clone())?),
            ProviderKind::Mock => {
                let profile = match &cfg.mock_profile {
                    Some(path) => MockAnnotatorProfile::load(path)?,
                    None => MockAnnotatorProfile::synthetic(cfg.seed, cfg.mock_spread),
                };
                Arc::new(MockBackend::new(profile, spec.clone(), cfg.model.clone(), cfg.temperature))
            }
        };
        let limiter = match cfg.kind {
            // nothing to protect locally
            ProviderKind::Mock => RateLimiter::unpaced(cfg.max_in_flight),
            ProviderKind::HostedChat => RateLimiter::new(cfg.max_in_flight, cfg.requests_per_second),
        };
        Ok(Gateway::new(backend, limiter))
    }

    pub fn backend(&self) -> &dyn CompletionBackend {
        self.backend.as_ref()
    }

    pub async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        if request.user.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user text is empty".into()));
        }
        let _permit = self.limiter.acquire().await;
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.backend.complete(request).await
    }

    /// Requests sent so far through this gateway and its clones.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

/// One-off completion with the backend described by `cfg`.
///
/// For the mock backend the user text stands in for the review identity and
/// the default prompt's variables are rated.
pub async fn complete(
    cfg: &ProviderConfig,
    system_text: &str,
    user_text: &str,
) -> Result<CompletionResult, GatewayError> {
    let gateway = Gateway::from_config(cfg, &PromptSpec::default_utaut())?;
    let request = CompletionRequest {
        system: (!system_text.is_empty()).then(|| system_text.to_string()),
        user: user_text.to_string(),
        review_id: user_text.to_string(),
        draw_index: 0,
    };
    gateway.complete(&request).await
}
