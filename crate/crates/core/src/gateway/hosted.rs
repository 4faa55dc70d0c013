use std::time::Instant;

use async_trait::async_trait;
use log::{debug, warn};
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, CompletionResult, GatewayError, ProviderConfig};

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    model: Option<String>,
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

enum Failure {
    Transient { detail: String, timed_out: bool },
    Fatal(GatewayError),
}

/// Client for an HTTP JSON chat-completion endpoint.
pub struct HostedChatBackend {
    cfg: ProviderConfig,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::Client,
}

impl HostedChatBackend {
    pub fn new(cfg: ProviderConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let client = reqwest::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HostedChatBackend {
            endpoint: cfg.endpoint(),
            cfg,
            api_key,
            client,
        })
    }

    /// Reads the bearer token from `cfg.api_key_env`.
    pub fn from_env(cfg: ProviderConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if key.is_none() {
            warn!(
                "{} is not set; sending requests to {} without credentials",
                cfg.api_key_env,
                cfg.endpoint()
            );
        }
        Self::new(cfg, key)
    }

    async fn attempt(&self, request: &CompletionRequest) -> Result<(String, String, String), Failure> {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &request.system {
            messages.push(ChatMessage {
                role: "system",
                content: system,
            });
        }
        messages.push(ChatMessage {
            role: "user",
            content: &request.user,
        });
        let body = ChatRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature,
            messages,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = match req.send().await {
            Ok(r) => r,
            Err(e) => {
                return Err(Failure::Transient {
                    detail: e.to_string(),
                    timed_out: e.is_timeout(),
                })
            }
        };
        let status = response.status();
        let header_id = response
            .headers()
            .get("x-request-id")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let text = match response.text().await {
            Ok(t) => t,
            Err(e) => {
                return Err(Failure::Transient {
                    detail: e.to_string(),
                    timed_out: e.is_timeout(),
                })
            }
        };
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Failure::Fatal(GatewayError::Auth {
                status: status.as_u16(),
                endpoint: self.endpoint.clone(),
            }));
        }
        if status == StatusCode::TOO_MANY_REQUESTS
            || status == StatusCode::REQUEST_TIMEOUT
            || status.is_server_error()
        {
            return Err(Failure::Transient {
                detail: format!("HTTP {}", status.as_u16()),
                timed_out: false,
            });
        }
        if !status.is_success() {
            return Err(Failure::Fatal(GatewayError::Api {
                status: status.as_u16(),
                endpoint: self.endpoint.clone(),
                body: text.chars().take(500).collect(),
            }));
        }
        let malformed = |detail: String| {
            Failure::Fatal(GatewayError::MalformedResponse {
                endpoint: self.endpoint.clone(),
                detail,
            })
        };
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| malformed("no message content in first choice".into()))?;
        let request_id = parsed.id.or(header_id).unwrap_or_default();
        let model = parsed.model.unwrap_or_else(|| self.cfg.model.clone());
        Ok((content, model, request_id))
    }
}

#[async_trait]
impl CompletionBackend for HostedChatBackend {
    fn endpoint(&self) -> String {
        self.endpoint.clone()
    }

    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn temperature(&self) -> f64 {
        self.cfg.temperature
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let started = Instant::now();
        let max_attempts = self.cfg.max_retries + 1;
        let mut attempt = 1;
        loop {
            match self.attempt(request).await {
                Ok((raw_text, model, request_id)) => {
                    return Ok(CompletionResult {
                        raw_text,
                        model,
                        request_id,
                        latency: started.elapsed(),
                        attempt_count: attempt,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient { detail, timed_out }) => {
                    if attempt >= max_attempts {
                        return Err(if timed_out {
                            GatewayError::Timeout {
                                attempts: attempt,
                                endpoint: self.endpoint.clone(),
                            }
                        } else {
                            GatewayError::RetriesExhausted {
                                attempts: attempt,
                                endpoint: self.endpoint.clone(),
                                last_error: detail,
                            }
                        });
                    }
                    let delay = self.cfg.backoff_before_retry(attempt - 1);
                    debug!("attempt {attempt} on {} failed ({detail}); retrying in {delay:?}", self.endpoint);
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
            }
        }
    }
}
