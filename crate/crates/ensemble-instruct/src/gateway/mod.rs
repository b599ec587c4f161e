//! Uniform completion interface over remote models and scripted mocks.

mod http;
mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::HttpClient;
pub use mock::{MockCall, MockEntry, MockScript, PromptMatcher};

pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_RETRIES: u32 = 3;
/// Sampling temperature for instruction and instance proposals.
pub const GENERATION_TEMPERATURE: f64 = 0.7;
/// Sampling temperature for additional outputs used in voting.
pub const OUTPUT_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Option<String>,
    pub model_id: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: GENERATION_TEMPERATURE,
            stop: None,
            model_id: model_id.into(),
        }
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop = Some(stop.into());
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be a finite non-negative number, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    /// Generation hit `max_tokens`.
    Length,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

/// Static description of a backend. `instructed` marks instruction-tuned
/// models, which are prompted zero-shot for additional outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub instructed: bool,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Mock script file (JSON Lines), for `kind = "mock"`.
    #[serde(default)]
    pub script: Option<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_parallelism() -> usize {
    DEFAULT_PARALLELISM
}

fn default_retries() -> u32 {
    DEFAULT_RETRIES
}

impl BackendDescriptor {
    pub fn http(name: impl Into<String>, base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: BackendKind::Http,
            base_url: Some(base_url.into()),
            model_id: model_id.into(),
            instructed: false,
            api_key_env: None,
            script: None,
            parallelism: DEFAULT_PARALLELISM,
            retries: DEFAULT_RETRIES,
        }
    }

    pub fn mock(name: impl Into<String>, instructed: bool) -> Self {
        let name = name.into();
        Self {
            model_id: name.clone(),
            name,
            kind: BackendKind::Mock,
            base_url: None,
            instructed,
            api_key_env: None,
            script: None,
            parallelism: 1,
            retries: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.name.trim().is_empty() {
            return Err(GatewayError::Config("backend name is empty".into()));
        }
        if self.kind == BackendKind::Http && self.base_url.as_deref().is_none_or(|u| u.trim().is_empty()) {
            return Err(GatewayError::Config(format!(
                "backend {:?}: http backends require base_url",
                self.name
            )));
        }
        if self.parallelism == 0 {
            return Err(GatewayError::Config(format!(
                "backend {:?}: parallelism must be at least 1",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend {backend}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        backend: String,
        attempts: u32,
        message: String,
    },
    #[error("backend {backend}: HTTP {status}: {body}")]
    Protocol {
        backend: String,
        status: u16,
        body: String,
    },
    #[error("backend {backend}: no script entry matches prompt starting {prompt:?}")]
    ScriptMiss { backend: String, prompt: String },
    #[error("duplicate mock matcher {0:?}")]
    DuplicateMatcher(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// Short category used in CLI error output.
    pub fn category(&self) -> &'static str {
        match self {
            GatewayError::Transport { .. } => "transport",
            GatewayError::Protocol { .. } => "protocol",
            GatewayError::ScriptMiss { .. } => "script_miss",
            GatewayError::DuplicateMatcher(_) | GatewayError::Config(_) => "config",
            GatewayError::InvalidRequest(_) => "invalid_request",
        }
    }
}

/// Counting semaphore bounding in-flight requests per backend.
#[derive(Debug)]
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut n = self.available.lock().expect("permit lock poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("permit lock poisoned");
        }
        *n -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("permit lock poisoned") += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
enum Inner {
    Http(HttpClient),
    Mock(MockScript),
}

/// A live backend handle. Shareable across threads.
#[derive(Debug)]
pub struct Backend {
    descriptor: BackendDescriptor,
    inner: Inner,
    permits: Permits,
    attempts: AtomicU64,
}

impl Backend {
    /// Connects an HTTP backend. The bearer token, if any, is read from the
    /// environment variable named by `api_key_env`.
    pub fn http(descriptor: BackendDescriptor) -> Result<Self, GatewayError> {
        Self::http_with_backoff(descriptor, http::DEFAULT_BACKOFF)
    }

    pub fn http_with_backoff(descriptor: BackendDescriptor, base_backoff: Duration) -> Result<Self, GatewayError> {
        descriptor.validate()?;
        if descriptor.kind != BackendKind::Http {
            return Err(GatewayError::Config(format!("backend {:?} is not http", descriptor.name)));
        }
        let api_key = descriptor
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok());
        let client = HttpClient::new(
            descriptor.base_url.clone().unwrap_or_default(),
            api_key,
            descriptor.retries,
            base_backoff,
        )?;
        Ok(Self::with_inner(descriptor, Inner::Http(client)))
    }

    /// Builds a scripted backend. Fails if two entries share a matcher.
    pub fn script_mock(descriptor: BackendDescriptor, entries: Vec<MockEntry>) -> Result<Self, GatewayError> {
        descriptor.validate()?;
        let script = MockScript::new(entries)?;
        Ok(Self::with_inner(descriptor, Inner::Mock(script)))
    }

    fn with_inner(descriptor: BackendDescriptor, inner: Inner) -> Self {
        let parallelism = match inner {
            Inner::Mock(_) => 1,
            Inner::Http(_) => descriptor.parallelism,
        };
        Self {
            permits: Permits::new(parallelism),
            descriptor,
            inner,
            attempts: AtomicU64::new(0),
        }
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn name(&self) -> &str {
        &self.descriptor.name
    }

    pub fn instructed(&self) -> bool {
        self.descriptor.instructed
    }

    /// Total request attempts issued so far, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    /// Calls recorded by a mock backend. Empty for HTTP backends.
    pub fn mock_calls(&self) -> Vec<MockCall> {
        match &self.inner {
            Inner::Mock(m) => m.calls(),
            Inner::Http(_) => Vec::new(),
        }
    }

    /// A request for `prompt` carrying this backend's model id.
    pub fn request(&self, prompt: impl Into<String>) -> CompletionRequest {
        CompletionRequest::new(prompt, self.descriptor.model_id.clone())
    }

    /// Runs one completion. The returned text never contains the stop sequence.
    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        request.validate()?;
        let _permit = self.permits.acquire();
        let mut completion = match &self.inner {
            Inner::Http(client) => {
                let (result, attempts) = client.complete(&self.descriptor.name, request);
                self.attempts.fetch_add(u64::from(attempts), Ordering::Relaxed);
                log::debug!("backend {}: {} attempt(s)", self.descriptor.name, attempts);
                result?
            }
            Inner::Mock(script) => {
                self.attempts.fetch_add(1, Ordering::Relaxed);
                script.complete(&self.descriptor.name, &request.prompt)?
            }
        };
        if let Some(stop) = request.stop.as_deref().filter(|s| !s.is_empty()) {
            if let Some(i) = completion.text.find(stop) {
                completion.text.truncate(i);
                completion.finish_reason = FinishReason::Stop;
            }
        }
        Ok(completion)
    }

    /// Runs requests concurrently up to the backend's parallelism and returns
    /// results in request order. Mock backends run sequentially.
    pub fn complete_batch(&self, requests: &[CompletionRequest]) -> Vec<Result<Completion, GatewayError>> {
        let workers = match self.inner {
            Inner::Mock(_) => 1,
            Inner::Http(_) => self.descriptor.parallelism.min(requests.len()),
        };
        if workers <= 1 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Completion, GatewayError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    *slots[i].lock().expect("slot lock poisoned") = Some(self.complete(req));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock poisoned").expect("every slot filled"))
            .collect()
    }
}
