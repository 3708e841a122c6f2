//! Blocking client for OpenAI-compatible chat-completion endpoints, with
//! retries, a concurrency limit and a deterministic request log, plus an
//! in-process mock server for offline runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Value, json};
use thiserror::Error;

use crate::seed::sha256_hex;

pub const ENV_URL: &str = "CFRAG_LLM_URL";
pub const ENV_KEY: &str = "CFRAG_LLM_KEY";
pub const ENV_MODEL: &str = "CFRAG_LLM_MODEL";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no endpoint configured; set {ENV_URL} or `llm.url`")]
    MissingEndpoint,
    #[error("invalid llm setting: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Fixtures { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Base URL (`.../v1`) or full `.../chat/completions` endpoint.
    pub url: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Retries after the first attempt on timeouts and rate limiting.
    pub retries: u32,
    /// Wait before each retry; the last entry repeats if there are more
    /// retries than entries.
    pub backoff_ms: Vec<u64>,
    pub timeout_secs: u64,
    /// Maximum requests in flight at once.
    pub concurrency: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            url: None,
            api_key: None,
            model: "default".into(),
            max_tokens: 512,
            temperature: 0.0,
            retries: 3,
            backoff_ms: vec![1000, 2000, 4000],
            timeout_secs: 60,
            concurrency: 4,
        }
    }
}

impl LlmConfig {
    /// Fills unset fields from `CFRAG_LLM_URL`, `CFRAG_LLM_KEY` and
    /// `CFRAG_LLM_MODEL`.
    pub fn with_env(mut self) -> Self {
        if self.url.is_none() {
            self.url = std::env::var(ENV_URL).ok().filter(|s| !s.is_empty());
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var(ENV_KEY).ok().filter(|s| !s.is_empty());
        }
        if let Ok(model) = std::env::var(ENV_MODEL)
            && !model.is_empty()
            && self.model == LlmConfig::default().model
        {
            self.model = model;
        }
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.url.as_deref().is_none_or(str::is_empty) {
            return Err(LlmError::MissingEndpoint);
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Invalid(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.concurrency == 0 {
            return Err(LlmError::Invalid("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        let url = self
            .url
            .as_deref()
            .unwrap_or_default()
            .trim_end_matches('/');
        if url.ends_with("/chat/completions") {
            url.to_string()
        } else {
            format!("{url}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub request_id: String,
    pub prompt: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "code", rename_all = "snake_case")]
pub enum LlmStatus {
    Ok,
    Timeout,
    RateLimited,
    HttpError(u16),
    /// Generation stopped at the token limit; the partial completion is kept.
    Truncated,
    /// A 2xx reply without a usable completion.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub request_id: String,
    pub completion: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub status: LlmStatus,
    pub attempts: u32,
}

/// One line of the request log. Holds no timing so that identical runs
/// produce identical logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub request_id: String,
    pub prompt_sha256: String,
    pub model: String,
    pub status: LlmStatus,
    pub attempts: u32,
    pub completion_sha256: String,
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("semaphore lock");
        while *available == 0 {
            available = self.freed.wait(available).expect("semaphore lock");
        }
        *available -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore lock") += 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmClient {
    config: LlmConfig,
    agent: ureq::Agent,
    permits: Semaphore,
    log: Mutex<Vec<RequestLogEntry>>,
}

enum Attempt {
    Done(LlmStatus, String, Option<u64>, Option<u64>),
    Retry(LlmStatus),
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build();
        Ok(LlmClient {
            permits: Semaphore::new(config.concurrency),
            config,
            agent,
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// Request for `prompt` with the client's model settings.
    pub fn request(&self, request_id: impl Into<String>, prompt: impl Into<String>) -> LlmRequest {
        LlmRequest {
            request_id: request_id.into(),
            prompt: prompt.into(),
            model: self.config.model.clone(),
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .config
            .backoff_ms
            .get(retry as usize)
            .or(self.config.backoff_ms.last())
            .copied()
            .unwrap_or(0);
        Duration::from_millis(ms)
    }

    fn attempt(&self, req: &LlmRequest) -> Attempt {
        let body = json!({
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        let mut call = self
            .agent
            .post(&self.config.endpoint())
            .set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        match call.send_string(&body.to_string()) {
            Ok(response) => match response
                .into_string()
                .ok()
                .and_then(|text| serde_json::from_str::<Value>(&text).ok())
            {
                Some(value) => parse_completion(&value),
                None => Attempt::Done(LlmStatus::Malformed, String::new(), None, None),
            },
            Err(ureq::Error::Status(429, _)) => Attempt::Retry(LlmStatus::RateLimited),
            Err(ureq::Error::Status(code, _)) => {
                Attempt::Done(LlmStatus::HttpError(code), String::new(), None, None)
            }
            Err(ureq::Error::Transport(_)) => Attempt::Retry(LlmStatus::Timeout),
        }
    }

    /// Sends one request, retrying timeouts and rate limits with backoff.
    /// Never fails: exhausted retries surface as the last status.
    pub fn complete(&self, req: &LlmRequest) -> LlmResponse {
        let _permit = self.permits.acquire();
        let started = Instant::now();
        let mut attempts = 0;
        let (status, completion, prompt_tokens, completion_tokens) = loop {
            attempts += 1;
            match self.attempt(req) {
                Attempt::Done(status, text, pt, ct) => break (status, text, pt, ct),
                Attempt::Retry(status) => {
                    if attempts > self.config.retries {
                        break (status, String::new(), None, None);
                    }
                    log::debug!("{}: {:?}, retrying", req.request_id, status);
                    thread::sleep(self.backoff(attempts - 1));
                }
            }
        };
        let response = LlmResponse {
            request_id: req.request_id.clone(),
            completion,
            latency_ms: started.elapsed().as_millis() as u64,
            prompt_tokens,
            completion_tokens,
            status,
            attempts,
        };
        self.log.lock().expect("log lock").push(RequestLogEntry {
            request_id: req.request_id.clone(),
            prompt_sha256: sha256_hex(&req.prompt),
            model: req.model.clone(),
            status: response.status.clone(),
            attempts,
            completion_sha256: sha256_hex(&response.completion),
        });
        response
    }

    /// Request log sorted by request id.
    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        let mut log = self.log.lock().expect("log lock").clone();
        log.sort_by(|a, b| a.request_id.cmp(&b.request_id));
        log
    }
}

fn parse_completion(value: &Value) -> Attempt {
    let choice = &value["choices"][0];
    let text = choice["message"]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let usage = &value["usage"];
    let pt = usage["prompt_tokens"].as_u64();
    let ct = usage["completion_tokens"].as_u64();
    let status = if choice["finish_reason"].as_str() == Some("length") {
        LlmStatus::Truncated
    } else if text.is_empty() {
        LlmStatus::Malformed
    } else {
        LlmStatus::Ok
    };
    Attempt::Done(status, text, pt, ct)
}

/// Canned completions served by [`MockServer`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    /// SHA-256 (lowercase hex) of the prompt to completion.
    pub fixtures: HashMap<String, String>,
    /// Completion for prompts without a fixture.
    pub default_completion: String,
    /// Status codes returned, in order, before normal serving starts.
    pub scripted_statuses: Vec<u16>,
}

impl MockConfig {
    pub fn with_prompt(mut self, prompt: &str, completion: impl Into<String>) -> Self {
        self.fixtures.insert(sha256_hex(prompt), completion.into());
        self
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Fixtures {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| LlmError::Fixtures {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }
}

/// Chat-completion endpoint on a local port, answering from fixtures.
pub struct MockServer {
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
    port: u16,
    requests: Arc<AtomicUsize>,
}

impl MockServer {
    pub fn start(config: MockConfig) -> std::io::Result<MockServer> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("mock server has no ip address"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let scripted = Mutex::new(VecDeque::from(config.scripted_statuses.clone()));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    let scripted_status = scripted.lock().expect("script lock").pop_front();
                    let response = match scripted_status {
                        Some(code) if code != 200 => tiny_http::Response::from_string(
                            json!({"error": {"message": "scripted"}}).to_string(),
                        )
                        .with_status_code(code),
                        _ => {
                            let mut body = String::new();
                            let _ = request.as_reader().read_to_string(&mut body);
                            let (code, reply) = mock_reply(&config, &body);
                            tiny_http::Response::from_string(reply).with_status_code(code)
                        }
                    };
                    let _ = request.respond(response);
                }
            })
        };
        Ok(MockServer {
            server,
            handle: Some(handle),
            port,
            requests,
        })
    }

    /// Base URL to use as `llm.url`.
    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn mock_reply(config: &MockConfig, body: &str) -> (u16, String) {
    let Ok(request) = serde_json::from_str::<Value>(body) else {
        return (400, json!({"error": {"message": "bad json"}}).to_string());
    };
    let prompt = request["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default();
    let completion = config
        .fixtures
        .get(&sha256_hex(prompt))
        .unwrap_or(&config.default_completion);
    let reply = json!({
        "id": "mock",
        "object": "chat.completion",
        "model": request["model"],
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": completion},
            "finish_reason": "stop",
        }],
        "usage": {
            "prompt_tokens": prompt.split_whitespace().count(),
            "completion_tokens": completion.split_whitespace().count(),
        },
    });
    (200, reply.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn client(url: String, retries: u32) -> LlmClient {
        LlmClient::new(LlmConfig {
            url: Some(url),
            retries,
            backoff_ms: vec![1],
            timeout_secs: 5,
            ..LlmConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn echoes_fixture_completion() {
        let mock = MockServer::start(MockConfig::default().with_prompt("pick one", "[1]")).unwrap();
        let c = client(mock.url(), 3);
        let response = c.complete(&c.request("r1", "pick one"));
        assert_eq!(response.status, LlmStatus::Ok);
        assert_eq!(response.completion, "[1]");
        assert_eq!(response.attempts, 1);
    }

    #[test]
    fn unknown_prompt_gets_default() {
        let mock = MockServer::start(MockConfig {
            default_completion: "[-1]".into(),
            ..MockConfig::default()
        })
        .unwrap();
        let c = client(mock.url(), 0);
        assert_eq!(c.complete(&c.request("r", "anything")).completion, "[-1]");
    }

    #[test]
    fn retries_through_rate_limits() {
        let mock = MockServer::start(MockConfig {
            default_completion: "ok".into(),
            scripted_statuses: vec![429, 429],
            ..MockConfig::default()
        })
        .unwrap();
        let c = client(mock.url(), 3);
        let response = c.complete(&c.request("r", "p"));
        assert_eq!(response.status, LlmStatus::Ok);
        assert_eq!(response.attempts, 3);
        assert_eq!(mock.request_count(), 3);
    }

    #[test]
    fn other_errors_are_terminal() {
        let mock = MockServer::start(MockConfig {
            scripted_statuses: vec![500],
            default_completion: "late".into(),
            ..MockConfig::default()
        })
        .unwrap();
        let c = client(mock.url(), 3);
        let response = c.complete(&c.request("r", "p"));
        assert_eq!(response.status, LlmStatus::HttpError(500));
        assert_eq!(response.attempts, 1);
    }

    #[test]
    fn empty_completion_is_malformed() {
        let mock = MockServer::start(MockConfig::default()).unwrap();
        let c = client(mock.url(), 0);
        assert_eq!(
            c.complete(&c.request("r", "p")).status,
            LlmStatus::Malformed
        );
    }

    #[test]
    fn unreachable_endpoint_times_out_after_budget() {
        // Bind and drop a listener to find a port nothing listens on.
        let port = std::net::TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let c = client(format!("http://127.0.0.1:{port}/v1"), 2);
        let response = c.complete(&c.request("r", "p"));
        assert_eq!(response.status, LlmStatus::Timeout);
        assert_eq!(response.attempts, 3);
    }

    #[test]
    fn request_log_is_sorted_and_timing_free() {
        let mock = MockServer::start(MockConfig {
            default_completion: "x".into(),
            ..MockConfig::default()
        })
        .unwrap();
        let c = client(mock.url(), 0);
        for id in ["b", "a", "c"] {
            c.complete(&c.request(id, id));
        }
        let ids: Vec<_> = c.request_log().into_iter().map(|e| e.request_id).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn missing_endpoint_is_a_config_error() {
        assert!(matches!(
            LlmClient::new(LlmConfig::default()),
            Err(LlmError::MissingEndpoint)
        ));
        assert!(
            LlmConfig {
                url: Some("http://x".into()),
                temperature: -1.0,
                ..LlmConfig::default()
            }
            .validate()
            .is_err()
        );
    }

    #[test]
    fn endpoint_accepts_base_or_full_url() {
        let mut config = LlmConfig {
            url: Some("http://h/v1/".into()),
            ..LlmConfig::default()
        };
        assert_eq!(config.endpoint(), "http://h/v1/chat/completions");
        config.url = Some("http://h/v1/chat/completions".into());
        assert_eq!(config.endpoint(), "http://h/v1/chat/completions");
    }
}
