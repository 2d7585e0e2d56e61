//! Gateway to chat-completion agents.
//!
//! Everything that talks to a language model goes through [`Agent`]. Three
//! implementations ship: [`HttpAgent`] (OpenAI-compatible endpoint with retry),
//! [`MockAgent`] (canned responses, never touches the network) and
//! [`JournalingAgent`] which records request/response pairs for later replay.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const INTERPRET_TEMPLATE: &str = "interpret_v1";
pub const PLAN_TEMPLATE: &str = "plan_v1";

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

pub const ENV_ENDPOINT: &str = "GAZEFUSE_AGENT_URL";
pub const ENV_API_KEY: &str = "GAZEFUSE_AGENT_API_KEY";
pub const ENV_MODEL: &str = "GAZEFUSE_AGENT_MODEL";

const SYSTEM_MESSAGE: &str =
    "You are the language component of an assistive robot. Follow the output format exactly.";

const TEMPLATES: &[(&str, &str)] = &[
    (INTERPRET_TEMPLATE, include_str!("../assets/prompts/interpret_v1.txt")),
    (PLAN_TEMPLATE, include_str!("../assets/prompts/plan_v1.txt")),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    HttpError { status: u16, body: String, attempts: u32 },
    #[error("credential missing: set {0}")]
    CredentialMissing(String),
    #[error("agent endpoint not configured: set {0}")]
    EndpointMissing(String),
    #[error("no canned response for template {template} (variables {variables_hash})")]
    NoCannedResponse { template: String, variables_hash: String },
    #[error("unknown prompt template {0}")]
    UnknownTemplate(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("journal: {0}")]
    Journal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub prompt_template_id: String,
    pub variables: BTreeMap<String, String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl AgentRequest {
    pub fn new(template: &str, variables: BTreeMap<String, String>) -> Self {
        Self {
            prompt_template_id: template.to_string(),
            variables,
            model_id: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn variables_hash(&self) -> String {
        variables_hash(&self.variables)
    }

    pub fn render(&self) -> Result<String, AgentError> {
        render_template(&self.prompt_template_id, &self.variables)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub text: String,
    pub latency_ms: f64,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub attempts: u32,
}

impl AgentResponse {
    pub fn canned(text: impl Into<String>) -> Self {
        Self { text: text.into(), latency_ms: 0.0, prompt_tokens: 0, completion_tokens: 0, attempts: 1 }
    }
}

pub trait Agent: Send + Sync {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError>;
}

impl<A: Agent + ?Sized> Agent for Arc<A> {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        (**self).complete(req)
    }
}

/// Stable hash of the request variables (SHA-256 over their canonical JSON).
pub fn variables_hash(vars: &BTreeMap<String, String>) -> String {
    let canonical = serde_json::to_string(vars).expect("string map serializes");
    hex::encode(&Sha256::digest(canonical.as_bytes())[..16])
}

pub fn template_text(id: &str) -> Option<&'static str> {
    TEMPLATES.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}

/// Substitutes `{{name}}` placeholders; every placeholder must have a value.
pub fn render_template(id: &str, vars: &BTreeMap<String, String>) -> Result<String, AgentError> {
    let text = template_text(id).ok_or_else(|| AgentError::UnknownTemplate(id.to_string()))?;
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| AgentError::UnknownTemplate(format!("{id}: unterminated placeholder")))?;
        let name = after[..close].trim();
        let value = vars
            .get(name)
            .ok_or_else(|| AgentError::UnknownTemplate(format!("{id}: no value for {{{{{name}}}}}")))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Synthesizes a reply for requests the canned table does not cover.
pub trait Responder: Send + Sync {
    fn respond(&self, req: &AgentRequest) -> Option<String>;
}

/// Offline agent answering from a table keyed by (template, variables hash),
/// then by template alone, then by an optional [`Responder`].
#[derive(Default)]
pub struct MockAgent {
    exact: BTreeMap<(String, String), String>,
    by_template: BTreeMap<String, String>,
    fallback: Option<Arc<dyn Responder>>,
}

impl MockAgent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fallback(fallback: Arc<dyn Responder>) -> Self {
        Self { fallback: Some(fallback), ..Self::default() }
    }

    pub fn insert(&mut self, template: &str, variables_hash: &str, text: impl Into<String>) {
        self.exact.insert((template.to_string(), variables_hash.to_string()), text.into());
    }

    /// Answers every request for `template` with `text` unless an exact entry exists.
    pub fn insert_for_template(&mut self, template: &str, text: impl Into<String>) {
        self.by_template.insert(template.to_string(), text.into());
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.by_template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Strict replay table built from a journal file.
    pub fn from_journal(path: &Path) -> Result<Self, AgentError> {
        let mut agent = Self::new();
        for entry in read_journal(path)? {
            agent.insert(&entry.request.prompt_template_id, &entry.variables_hash, entry.response.text);
        }
        Ok(agent)
    }
}

impl Agent for MockAgent {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let hash = req.variables_hash();
        let text = self
            .exact
            .get(&(req.prompt_template_id.clone(), hash.clone()))
            .or_else(|| self.by_template.get(&req.prompt_template_id))
            .cloned()
            .or_else(|| self.fallback.as_ref().and_then(|f| f.respond(req)));
        text.map(AgentResponse::canned).ok_or(AgentError::NoCannedResponse {
            template: req.prompt_template_id.clone(),
            variables_hash: hash,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Io(String),
}

/// One HTTP POST. Implementations must not retry on their own.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError>;
}

/// Blocking transport over `ureq`.
#[derive(Debug, Default, Clone)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        match req.send(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string().map_err(|e| TransportError::Io(e.to_string()))?;
                Ok(HttpReply { status, body })
            }
            Err(ureq::Error::Timeout(_)) => Err(TransportError::Timeout),
            Err(e) => Err(TransportError::Io(e.to_string())),
        }
    }
}

/// Transport that refuses every call and counts the attempts.
#[derive(Debug, Default)]
pub struct FailingTransport {
    calls: AtomicUsize,
}

impl FailingTransport {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for FailingTransport {
    fn post(&self, url: &str, _: &[(String, String)], _: &str, _: Duration) -> Result<HttpReply, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Io(format!("network access is disabled (attempted POST {url})")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    /// Multiplicative jitter: delay is scaled by `1 + jitter * u`, `u ~ U[0, 1)`.
    pub jitter: f64,
    pub jitter_seed: u64,
    pub request_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            jitter: 0.25,
            jitter_seed: 0,
            request_timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based), exponential in `retry`.
    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let exp = self.base_delay.mul_f64(2f64.powi(retry.saturating_sub(1) as i32));
        exp.mul_f64(1.0 + self.jitter * rng.random::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model_id: Option<String>,
}

impl RemoteConfig {
    /// Reads endpoint, key and optional model from `lookup` (normally `std::env::var`).
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, AgentError> {
        let api_key = lookup(ENV_API_KEY)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| AgentError::CredentialMissing(ENV_API_KEY.into()))?;
        let endpoint = lookup(ENV_ENDPOINT)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| AgentError::EndpointMissing(ENV_ENDPOINT.into()))?;
        Ok(Self { endpoint, api_key, model_id: lookup(ENV_MODEL).filter(|v| !v.is_empty()) })
    }

    pub fn from_env() -> Result<Self, AgentError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }
}

type Sleeper = dyn Fn(Duration) + Send + Sync;

/// Chat-completions client for OpenAI-compatible endpoints.
pub struct HttpAgent {
    config: RemoteConfig,
    retry: RetryPolicy,
    transport: Arc<dyn Transport>,
    sleep: Arc<Sleeper>,
}

impl HttpAgent {
    pub fn new(config: RemoteConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, retry: RetryPolicy::default(), transport, sleep: Arc::new(std::thread::sleep) }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    /// Request body sent to `POST {endpoint}`.
    pub fn request_body(&self, req: &AgentRequest) -> Result<Value, AgentError> {
        let model = self.config.model_id.as_deref().unwrap_or(&req.model_id);
        Ok(json!({
            "model": model,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": req.render()?},
            ],
        }))
    }
}

fn is_retryable_status(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

pub fn parse_chat_completion(body: &str) -> Result<(String, u32, u32), AgentError> {
    let v: Value = serde_json::from_str(body).map_err(|e| AgentError::BadResponse(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| AgentError::BadResponse("missing choices[0].message.content".into()))?;
    let tokens = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0) as u32;
    Ok((text.to_string(), tokens("prompt_tokens"), tokens("completion_tokens")))
}

impl Agent for HttpAgent {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        if self.config.api_key.is_empty() {
            return Err(AgentError::CredentialMissing(ENV_API_KEY.into()));
        }
        let body = self.request_body(req)?.to_string();
        let headers = vec![
            ("Content-Type".to_string(), "application/json".to_string()),
            ("Authorization".to_string(), format!("Bearer {}", self.config.api_key)),
        ];
        let seed = self.retry.jitter_seed ^ u64::from_str_radix(&req.variables_hash()[..16], 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let started = Instant::now();
        let max_attempts = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.transport.post(&self.config.endpoint, &headers, &body, self.retry.request_timeout);
            let failure = match outcome {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    let (text, prompt_tokens, completion_tokens) = parse_chat_completion(&reply.body)?;
                    return Ok(AgentResponse {
                        text,
                        latency_ms: started.elapsed().as_secs_f64() * 1e3,
                        prompt_tokens,
                        completion_tokens,
                        attempts: attempt,
                    });
                }
                Ok(reply) => {
                    let err = AgentError::HttpError { status: reply.status, body: reply.body, attempts: attempt };
                    if !is_retryable_status(reply.status) {
                        return Err(err);
                    }
                    err
                }
                Err(TransportError::Timeout) => AgentError::Timeout { attempts: attempt },
                Err(TransportError::Io(msg)) => AgentError::Transport(msg),
            };
            if attempt >= max_attempts {
                return Err(failure);
            }
            log::warn!("agent request failed (attempt {attempt}/{max_attempts}): {failure}");
            (self.sleep)(self.retry.delay(attempt, &mut rng));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<String>,
    pub variables_hash: String,
    pub request: AgentRequest,
    pub response: AgentResponse,
    pub t_request_ms: u128,
    pub t_response_ms: u128,
}

/// Append-only JSON-lines log of agent exchanges.
pub struct Journal {
    out: Mutex<Box<dyn Write + Send>>,
}

impl Journal {
    pub fn create(path: &Path) -> Result<Self, AgentError> {
        let file = File::create(path).map_err(|e| AgentError::Journal(format!("{}: {e}", path.display())))?;
        Ok(Self::from_writer(BufWriter::new(file)))
    }

    pub fn from_writer(w: impl Write + Send + 'static) -> Self {
        Self { out: Mutex::new(Box::new(w)) }
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<(), AgentError> {
        let line = serde_json::to_string(entry).map_err(|e| AgentError::Journal(e.to_string()))?;
        let mut out = self.out.lock().expect("journal lock");
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| AgentError::Journal(e.to_string()))
    }
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, AgentError> {
    let file = File::open(path).map_err(|e| AgentError::Journal(format!("{}: {e}", path.display())))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line.map_err(|e| AgentError::Journal(e.to_string()))?;
            serde_json::from_str(&line).map_err(|e| AgentError::Journal(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Wraps an agent and journals every successful exchange.
pub struct JournalingAgent<A> {
    inner: A,
    journal: Arc<Journal>,
    scenario_id: Option<String>,
}

impl<A: Agent> JournalingAgent<A> {
    pub fn new(inner: A, journal: Arc<Journal>) -> Self {
        Self { inner, journal, scenario_id: None }
    }

    pub fn for_scenario(mut self, id: impl Into<String>) -> Self {
        self.scenario_id = Some(id.into());
        self
    }
}

impl<A: Agent> Agent for JournalingAgent<A> {
    fn complete(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let t_request_ms = unix_ms();
        let response = self.inner.complete(req)?;
        self.journal.append(&JournalEntry {
            scenario_id: self.scenario_id.clone(),
            variables_hash: req.variables_hash(),
            request: req.clone(),
            response: response.clone(),
            t_request_ms,
            t_response_ms: unix_ms(),
        })?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn interpret_request(text: &str) -> AgentRequest {
        AgentRequest::new(INTERPRET_TEMPLATE, vars(&[("transcript", text), ("word_timings", "[]")]))
    }

    struct Scripted {
        replies: Mutex<Vec<Result<HttpReply, TransportError>>>,
        calls: AtomicU32,
        last_body: Mutex<String>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpReply, TransportError>>) -> Self {
            replies.reverse();
            Self { replies: Mutex::new(replies), calls: AtomicU32::new(0), last_body: Mutex::new(String::new()) }
        }
    }

    impl Transport for Scripted {
        fn post(&self, _: &str, headers: &[(String, String)], body: &str, _: Duration) -> Result<HttpReply, TransportError> {
            assert!(headers.iter().any(|(k, v)| k == "Authorization" && v == "Bearer sk-test"));
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.last_body.lock().unwrap() = body.to_string();
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn ok_reply(text: &str) -> Result<HttpReply, TransportError> {
        Ok(HttpReply {
            status: 200,
            body: json!({"choices":[{"message":{"role":"assistant","content":text}}],"usage":{"prompt_tokens":12,"completion_tokens":5}}).to_string(),
        })
    }

    fn config() -> RemoteConfig {
        RemoteConfig { endpoint: "http://agent.invalid/v1/chat/completions".into(), api_key: "sk-test".into(), model_id: None }
    }

    #[test]
    fn templates_render_all_placeholders() {
        let text = interpret_request("put the apple there").render().unwrap();
        assert!(text.contains("Command: put the apple there"));
        assert!(!text.contains("{{"));
        let err = AgentRequest::new(INTERPRET_TEMPLATE, vars(&[("transcript", "x")])).render();
        assert!(matches!(err, Err(AgentError::UnknownTemplate(_))));
        assert!(template_text("nope").is_none());
    }

    #[test]
    fn variables_hash_is_stable_and_order_free() {
        let a = variables_hash(&vars(&[("a", "1"), ("b", "2")]));
        let b = variables_hash(&vars(&[("b", "2"), ("a", "1")]));
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
        assert_ne!(a, variables_hash(&vars(&[("a", "1"), ("b", "3")])));
    }

    #[test]
    fn mock_lookup_order() {
        let req = interpret_request("put the apple there");
        let mut mock = MockAgent::new();
        assert!(matches!(mock.complete(&req), Err(AgentError::NoCannedResponse { .. })));
        mock.insert_for_template(INTERPRET_TEMPLATE, "generic");
        assert_eq!(mock.complete(&req).unwrap().text, "generic");
        mock.insert(INTERPRET_TEMPLATE, &req.variables_hash(), r#"{"slots":[]}"#);
        assert_eq!(mock.complete(&req).unwrap().text, r#"{"slots":[]}"#);
    }

    #[test]
    fn credential_checked_before_network() {
        let err = RemoteConfig::from_lookup(|k| (k == ENV_ENDPOINT).then(|| "http://x".to_string()));
        assert_eq!(err.unwrap_err(), AgentError::CredentialMissing(ENV_API_KEY.into()));
        let transport = Arc::new(FailingTransport::default());
        let agent = HttpAgent::new(RemoteConfig { api_key: String::new(), ..config() }, transport.clone());
        assert!(matches!(agent.complete(&interpret_request("x")), Err(AgentError::CredentialMissing(_))));
        assert_eq!(transport.calls(), 0);
    }

    #[test]
    fn env_config_reads_all_vars() {
        let cfg = RemoteConfig::from_lookup(|k| match k {
            ENV_ENDPOINT => Some("http://e".into()),
            ENV_API_KEY => Some("k".into()),
            ENV_MODEL => Some("m".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.model_id.as_deref(), Some("m"));
    }

    #[test]
    fn retries_transient_failures() {
        let transport = Arc::new(Scripted::new(vec![
            Ok(HttpReply { status: 503, body: "busy".into() }),
            Ok(HttpReply { status: 502, body: "bad gateway".into() }),
            ok_reply("done"),
        ]));
        let delays = Arc::new(Mutex::new(Vec::new()));
        let d = delays.clone();
        let agent = HttpAgent::new(config(), transport.clone()).with_sleeper(move |dur| d.lock().unwrap().push(dur));
        let resp = agent.complete(&interpret_request("pick up this")).unwrap();
        assert_eq!(resp.text, "done");
        assert_eq!(resp.attempts, 3);
        assert_eq!(resp.prompt_tokens, 12);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
        let delays = delays.lock().unwrap();
        assert_eq!(delays.len(), 2);
        assert!(delays[0] >= Duration::from_millis(500) && delays[0] < Duration::from_millis(625));
        assert!(delays[1] >= Duration::from_millis(1000) && delays[1] < Duration::from_millis(1250));
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let transport = Arc::new(Scripted::new(vec![
            Err(TransportError::Timeout),
            Err(TransportError::Timeout),
            Err(TransportError::Timeout),
        ]));
        let agent = HttpAgent::new(config(), transport).with_sleeper(|_| {});
        assert_eq!(agent.complete(&interpret_request("x")).unwrap_err(), AgentError::Timeout { attempts: 3 });
    }

    #[test]
    fn client_errors_are_not_retried() {
        let transport = Arc::new(Scripted::new(vec![Ok(HttpReply { status: 401, body: "no".into() })]));
        let agent = HttpAgent::new(config(), transport.clone()).with_sleeper(|_| panic!("no retry expected"));
        assert!(matches!(agent.complete(&interpret_request("x")), Err(AgentError::HttpError { status: 401, attempts: 1, .. })));
    }

    #[test]
    fn request_body_is_chat_completion() {
        let transport = Arc::new(Scripted::new(vec![ok_reply("ok")]));
        let agent = HttpAgent::new(config(), transport.clone());
        agent.complete(&interpret_request("grab this")).unwrap();
        let body: Value = serde_json::from_str(&transport.last_body.lock().unwrap()).unwrap();
        assert_eq!(body["model"], DEFAULT_MODEL);
        assert_eq!(body["temperature"], 1.0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert!(body["messages"][1]["content"].as_str().unwrap().contains("grab this"));
    }

    #[test]
    fn journal_round_trip_replays_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let mut mock = MockAgent::new();
        mock.insert_for_template(INTERPRET_TEMPLATE, "reply-1");
        {
            let journal = Arc::new(Journal::create(&path).unwrap());
            let agent = JournalingAgent::new(mock, journal).for_scenario("s");
            agent.complete(&interpret_request("pick up this")).unwrap();
        }
        let entries = read_journal(&path).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].scenario_id.as_deref(), Some("s"));
        let replay = MockAgent::from_journal(&path).unwrap();
        assert_eq!(replay.complete(&interpret_request("pick up this")).unwrap().text, "reply-1");
        assert!(matches!(
            replay.complete(&interpret_request("grab this")),
            Err(AgentError::NoCannedResponse { .. })
        ));
    }

    #[test]
    fn chat_completion_parsing() {
        assert!(parse_chat_completion("{}").is_err());
        assert!(parse_chat_completion("not json").is_err());
        let (t, p, c) = parse_chat_completion(r#"{"choices":[{"message":{"content":"hi"}}]}"#).unwrap();
        assert_eq!((t.as_str(), p, c), ("hi", 0, 0));
    }
}
