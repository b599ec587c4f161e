//! OpenAI-compatible `/v1/completions` client with bounded retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Completion, CompletionRequest, FinishReason, GatewayError};

pub(super) const DEFAULT_BACKOFF: Duration = Duration::from_millis(500);
const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);
const BODY_EXCERPT: usize = 300;

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a str>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug)]
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Done(Result<Completion, GatewayError>),
    Retry(String),
}

fn excerpt(body: &str) -> String {
    let mut end = body.len().min(BODY_EXCERPT);
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    body[..end].to_string()
}

fn is_retryable(status: u16) -> bool {
    matches!(status, 408 | 409 | 425 | 429) || status >= 500
}

impl HttpClient {
    pub fn new(
        base_url: String,
        api_key: Option<String>,
        retries: u32,
        backoff: Duration,
    ) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            endpoint: format!("{}/v1/completions", base_url.trim_end_matches('/')),
            api_key,
            retries,
            backoff,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Issues the request, retrying transport failures and retryable statuses
    /// with exponential backoff. Returns the outcome and the attempts made.
    pub fn complete(&self, backend: &str, request: &CompletionRequest) -> (Result<Completion, GatewayError>, u32) {
        let body = WireRequest {
            model: &request.model_id,
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            stop: request.stop.as_deref(),
        };
        let max_attempts = self.retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            match self.attempt(backend, &body) {
                Attempt::Done(result) => return (result, attempt),
                Attempt::Retry(message) => {
                    log::warn!("backend {backend}: attempt {attempt}/{max_attempts} failed: {message}");
                    last_error = message;
                    if attempt < max_attempts {
                        std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
                    }
                }
            }
        }
        let err = GatewayError::Transport {
            backend: backend.to_string(),
            attempts: max_attempts,
            message: last_error,
        };
        (Err(err), max_attempts)
    }

    fn attempt(&self, backend: &str, body: &WireRequest<'_>) -> Attempt {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if !(200..300).contains(&status) {
            if is_retryable(status) {
                return Attempt::Retry(format!("HTTP {status}: {}", excerpt(&text)));
            }
            return Attempt::Done(Err(GatewayError::Protocol {
                backend: backend.to_string(),
                status,
                body: excerpt(&text),
            }));
        }
        let parsed: WireResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => {
                return Attempt::Done(Err(GatewayError::Protocol {
                    backend: backend.to_string(),
                    status,
                    body: format!("unparseable response ({e}): {}", excerpt(&text)),
                }))
            }
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Done(Err(GatewayError::Protocol {
                backend: backend.to_string(),
                status,
                body: "response has no choices".into(),
            }));
        };
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            _ => FinishReason::Stop,
        };
        Attempt::Done(Ok(Completion {
            text: choice.text,
            finish_reason,
        }))
    }
}
