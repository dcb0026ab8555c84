//! Uniform access to chat-completion models with a deterministic replay
//! cache.
//!
//! Three backends share one code path, selected by the endpoint scheme:
//! `http(s)://` performs live calls, `replay:` serves from the cache only,
//! and `mock:<script.json>` answers from a substring-rule script. Every
//! response is cached under a content hash of the request, so a warm cache
//! makes any run replayable byte for byte.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Speaker of one conversation turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One conversation turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

pub type Conversation = Vec<Message>;

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    512
}
fn default_timeout() -> u64 {
    30
}
fn default_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}

/// Connection settings for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// `http(s)://...`, `replay:`, or `mock:<script.json>`.
    pub endpoint: String,
    /// Environment variable holding the API key; the key itself is never
    /// stored or logged.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

impl ModelSpec {
    /// Spec for a scripted mock model.
    pub fn mock(name: &str, script_path: &Path) -> Self {
        ModelSpec {
            name: name.to_string(),
            endpoint: format!("mock:{}", script_path.display()),
            api_key_env: None,
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_concurrency: default_concurrency(),
        }
    }
}

/// One completed request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub model: String,
    pub conversation: Conversation,
    pub raw_response: String,
    pub latency_ms: u64,
    pub cache_hit: bool,
    /// Backend attempts made; zero for cache hits.
    pub attempt_count: u32,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out after {0} attempts")]
    Timeout(u32),
    #[error("http status {status}: {detail}")]
    HttpError { status: u16, detail: String },
    #[error("rate limited; gave up after {0} attempts")]
    RateLimited(u32),
    #[error("no cached response for this request in replay-only mode")]
    CacheMissInReplayOnlyMode,
    #[error("network error: {0}")]
    Network(String),
    #[error("unusable endpoint {0:?} (expected http(s)://, replay:, or mock:<script>)")]
    BadEndpoint(String),
    #[error("mock script {path}: {detail}")]
    BadScript { path: String, detail: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("conversation roles must alternate user/assistant after an optional system turn")]
    InvalidConversation,
    #[error("cache io error at {path}: {detail}")]
    CacheIo { path: String, detail: String },
}

/// Content hash identifying a request: model name, decoding parameters, and
/// the full conversation.
pub fn cache_key(spec: &ModelSpec, conversation: &Conversation) -> String {
    let canonical = serde_json::json!({
        "model": spec.name,
        "temperature": spec.temperature,
        "max_tokens": spec.max_tokens,
        "conversation": conversation,
    });
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

/// Append-only JSONL store of responses keyed by request hash.
#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    model: String,
    conversation: Conversation,
    response: String,
    timestamp: u64,
}

pub struct ResponseCache {
    path: PathBuf,
    map: RwLock<HashMap<String, String>>,
    file: Mutex<File>,
}

impl ResponseCache {
    /// Opens (or creates) the cache file and loads every readable entry.
    /// A truncated trailing line from an interrupted run is skipped.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let io = |e: std::io::Error| GatewayError::CacheIo {
            path: path.display().to_string(),
            detail: e.to_string(),
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
        }
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for line in reader.lines() {
                let line = line.map_err(io)?;
                if let Ok(entry) = serde_json::from_str::<CacheEntry>(&line) {
                    map.insert(entry.key, entry.response);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        Ok(ResponseCache {
            path: path.to_path_buf(),
            map: RwLock::new(map),
            file: Mutex::new(file),
        })
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &str) -> Option<String> {
        self.map.read().unwrap().get(key).cloned()
    }

    fn put(
        &self,
        key: &str,
        spec: &ModelSpec,
        conversation: &Conversation,
        response: &str,
    ) -> Result<(), GatewayError> {
        let entry = CacheEntry {
            key: key.to_string(),
            model: spec.name.clone(),
            conversation: conversation.clone(),
            response: response.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let line = serde_json::to_string(&entry).expect("cache entry serializes");
        {
            // One write call per entry keeps a crashed run from interleaving
            // partial lines.
            let mut file = self.file.lock().unwrap();
            file.write_all(format!("{line}\n").as_bytes())
                .map_err(|e| GatewayError::CacheIo {
                    path: self.path.display().to_string(),
                    detail: e.to_string(),
                })?;
        }
        self.map
            .write()
            .unwrap()
            .insert(key.to_string(), response.to_string());
        Ok(())
    }
}

/// Substring-rule script backing a mock model: the first rule whose `match`
/// string occurs in the last user message supplies the response. No match
/// yields an empty response.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub pattern: String,
    pub response: String,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let data = std::fs::read_to_string(path).map_err(|e| GatewayError::BadScript {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&data).map_err(|e| GatewayError::BadScript {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn respond(&self, last_user_message: &str) -> String {
        for rule in &self.rules {
            if last_user_message.contains(&rule.pattern) {
                return rule.response.clone();
            }
        }
        String::new()
    }
}

enum Backend {
    Live(String),
    Replay,
    Mock(Arc<MockScript>),
}

/// Running counters over one gateway's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub backend_calls: usize,
    pub errors: usize,
}

/// Shared, thread-safe access point to all configured model backends.
pub struct Gateway {
    cache: Option<ResponseCache>,
    /// Forces replay-only behavior for every model.
    offline: bool,
    backoff_ms: u64,
    client: reqwest::blocking::Client,
    scripts: Mutex<HashMap<String, Arc<MockScript>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    backend_calls: AtomicUsize,
    errors: AtomicUsize,
}

impl Gateway {
    pub fn new(cache_path: Option<&Path>, offline: bool) -> Result<Self, GatewayError> {
        let cache = cache_path.map(ResponseCache::open).transpose()?;
        Ok(Gateway {
            cache,
            offline,
            backoff_ms: 250,
            client: reqwest::blocking::Client::new(),
            scripts: Mutex::new(HashMap::new()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            backend_calls: AtomicUsize::new(0),
            errors: AtomicUsize::new(0),
        })
    }

    /// Shortens the retry backoff; test use.
    pub fn with_backoff_ms(mut self, ms: u64) -> Self {
        self.backoff_ms = ms;
        self
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            cache_hits: self.hits.load(Ordering::Relaxed),
            cache_misses: self.misses.load(Ordering::Relaxed),
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
            errors: self.errors.load(Ordering::Relaxed),
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.as_ref().map(ResponseCache::len).unwrap_or(0)
    }

    fn backend_for(&self, spec: &ModelSpec) -> Result<Backend, GatewayError> {
        let endpoint = spec.endpoint.trim();
        if self.offline {
            return Ok(Backend::Replay);
        }
        if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            return Ok(Backend::Live(endpoint.trim_end_matches('/').to_string()));
        }
        if endpoint.starts_with("replay:") || endpoint == "replay" {
            return Ok(Backend::Replay);
        }
        if let Some(path) = endpoint.strip_prefix("mock:") {
            let mut scripts = self.scripts.lock().unwrap();
            if let Some(script) = scripts.get(path) {
                return Ok(Backend::Mock(script.clone()));
            }
            let script = Arc::new(MockScript::load(Path::new(path))?);
            scripts.insert(path.to_string(), script.clone());
            return Ok(Backend::Mock(script));
        }
        Err(GatewayError::BadEndpoint(spec.endpoint.clone()))
    }

    fn validate(conversation: &Conversation) -> Result<(), GatewayError> {
        let mut turns = conversation.iter();
        let mut expected = Role::User;
        let mut first = true;
        for message in turns.by_ref() {
            if first && message.role == Role::System {
                first = false;
                continue;
            }
            first = false;
            if message.role != expected {
                return Err(GatewayError::InvalidConversation);
            }
            expected = if expected == Role::User {
                Role::Assistant
            } else {
                Role::User
            };
        }
        if conversation.iter().all(|m| m.role != Role::User) {
            return Err(GatewayError::InvalidConversation);
        }
        Ok(())
    }

    /// Completes one conversation: cached response if present, otherwise a
    /// backend call whose response is cached before returning.
    pub fn complete(
        &self,
        spec: &ModelSpec,
        conversation: &Conversation,
    ) -> Result<Exchange, GatewayError> {
        Self::validate(conversation)?;
        let key = cache_key(spec, conversation);
        if let Some(cache) = &self.cache {
            if let Some(response) = cache.get(&key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(Exchange {
                    model: spec.name.clone(),
                    conversation: conversation.clone(),
                    raw_response: response,
                    latency_ms: 0,
                    cache_hit: true,
                    attempt_count: 0,
                });
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);

        let backend = self.backend_for(spec)?;
        let started = Instant::now();
        let (response, attempts) = match &backend {
            Backend::Replay => {
                self.errors.fetch_add(1, Ordering::Relaxed);
                return Err(GatewayError::CacheMissInReplayOnlyMode);
            }
            Backend::Mock(script) => {
                self.backend_calls.fetch_add(1, Ordering::Relaxed);
                let last_user = conversation
                    .iter()
                    .rev()
                    .find(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .unwrap_or("");
                (script.respond(last_user), 1)
            }
            Backend::Live(base) => self.call_live(base, spec, conversation).inspect_err(|_| {
                self.errors.fetch_add(1, Ordering::Relaxed);
            })?,
        };

        if let Some(cache) = &self.cache {
            cache.put(&key, spec, conversation, &response)?;
        }
        Ok(Exchange {
            model: spec.name.clone(),
            conversation: conversation.clone(),
            raw_response: response,
            latency_ms: started.elapsed().as_millis() as u64,
            cache_hit: false,
            attempt_count: attempts,
        })
    }

    fn call_live(
        &self,
        base: &str,
        spec: &ModelSpec,
        conversation: &Conversation,
    ) -> Result<(String, u32), GatewayError> {
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/chat/completions")
        };
        let body = serde_json::json!({
            "model": spec.name,
            "messages": conversation,
            "temperature": spec.temperature,
            "max_tokens": spec.max_tokens,
        });
        let api_key = spec
            .api_key_env
            .as_ref()
            .and_then(|var| std::env::var(var).ok());

        let mut attempt = 0u32;
        loop {
            attempt += 1;
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            let mut request = self
                .client
                .post(&url)
                .timeout(Duration::from_secs(spec.request_timeout_secs))
                .json(&body);
            if let Some(key) = &api_key {
                request = request.bearer_auth(key);
            }
            let outcome = request.send();

            let retryable: GatewayError = match outcome {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let value: serde_json::Value = response
                            .json()
                            .map_err(|e| GatewayError::BadResponse(e.to_string()))?;
                        let content = value
                            .get("choices")
                            .and_then(|c| c.get(0))
                            .and_then(|c| c.get("message"))
                            .and_then(|m| m.get("content"))
                            .and_then(|c| c.as_str())
                            .ok_or_else(|| {
                                GatewayError::BadResponse(
                                    "missing choices[0].message.content".to_string(),
                                )
                            })?;
                        return Ok((content.to_string(), attempt));
                    } else if status.as_u16() == 429 {
                        GatewayError::RateLimited(attempt)
                    } else if status.is_server_error() {
                        GatewayError::HttpError {
                            status: status.as_u16(),
                            detail: response.text().unwrap_or_default(),
                        }
                    } else {
                        // Client errors are not transient; surface at once.
                        return Err(GatewayError::HttpError {
                            status: status.as_u16(),
                            detail: response.text().unwrap_or_default(),
                        });
                    }
                }
                Err(e) if e.is_timeout() => GatewayError::Timeout(attempt),
                Err(e) => GatewayError::Network(e.to_string()),
            };

            if attempt > spec.max_retries {
                return Err(retryable);
            }
            std::thread::sleep(Duration::from_millis(
                self.backoff_ms.saturating_mul(1 << (attempt - 1).min(8)),
            ));
        }
    }

    /// Completes a batch with at most `spec.max_concurrency` requests in
    /// flight. Output order matches input order; per-item failures do not
    /// abort the rest.
    pub fn complete_batch(
        &self,
        spec: &ModelSpec,
        conversations: &[Conversation],
    ) -> Vec<Result<Exchange, GatewayError>> {
        let workers = spec.max_concurrency.max(1).min(conversations.len().max(1));
        if workers <= 1 || conversations.len() <= 1 {
            return conversations
                .iter()
                .map(|c| self.complete(spec, c))
                .collect();
        }
        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<Exchange, GatewayError>>>> =
            conversations.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= conversations.len() {
                        break;
                    }
                    let outcome = self.complete(spec, &conversations[i]);
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker filled slot"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock_spec(dir: &Path, rules: &[(&str, &str)]) -> ModelSpec {
        let script: Vec<serde_json::Value> = rules
            .iter()
            .map(|(pattern, response)| serde_json::json!({"match": pattern, "response": response}))
            .collect();
        let path = dir.join("script.json");
        std::fs::write(&path, serde_json::to_string(&script).unwrap()).unwrap();
        ModelSpec::mock("mock-model", &path)
    }

    fn ask(text: &str) -> Conversation {
        vec![Message::user(text)]
    }

    #[test]
    fn mock_rules_match_the_last_user_message() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("death penalty", "For")]);
        let gateway = Gateway::new(None, false).unwrap();
        let exchange = gateway
            .complete(&spec, &ask("Is this about the death penalty?"))
            .unwrap();
        assert_eq!(exchange.raw_response, "For");
        assert!(!exchange.cache_hit);

        // Unmatched prompts get an empty response.
        let exchange = gateway.complete(&spec, &ask("different topic")).unwrap();
        assert_eq!(exchange.raw_response, "");
    }

    #[test]
    fn first_matching_rule_wins() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("certainty", "90"), ("", "For")]);
        let gateway = Gateway::new(None, false).unwrap();
        let conv = vec![
            Message::user("classify"),
            Message::assistant("For"),
            Message::user("what is your certainty?"),
        ];
        assert_eq!(gateway.complete(&spec, &conv).unwrap().raw_response, "90");
        assert_eq!(
            gateway
                .complete(&spec, &ask("classify"))
                .unwrap()
                .raw_response,
            "For"
        );
    }

    #[test]
    fn second_identical_call_hits_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Against")]);
        let cache_path = dir.path().join("cache.jsonl");
        let gateway = Gateway::new(Some(&cache_path), false).unwrap();
        let first = gateway.complete(&spec, &ask("q")).unwrap();
        let second = gateway.complete(&spec, &ask("q")).unwrap();
        assert!(!first.cache_hit);
        assert!(second.cache_hit);
        assert_eq!(first.raw_response, second.raw_response);
        let stats = gateway.stats();
        assert_eq!(stats.cache_hits, 1);
        assert_eq!(stats.cache_misses, 1);
        assert_eq!(stats.backend_calls, 1);
    }

    #[test]
    fn cache_survives_reopening() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Yes")]);
        let cache_path = dir.path().join("cache.jsonl");
        {
            let gateway = Gateway::new(Some(&cache_path), false).unwrap();
            gateway.complete(&spec, &ask("q1")).unwrap();
            gateway.complete(&spec, &ask("q2")).unwrap();
        }
        let gateway = Gateway::new(Some(&cache_path), false).unwrap();
        assert_eq!(gateway.cache_len(), 2);
        let exchange = gateway.complete(&spec, &ask("q1")).unwrap();
        assert!(exchange.cache_hit);
    }

    #[test]
    fn truncated_trailing_entry_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Yes")]);
        let cache_path = dir.path().join("cache.jsonl");
        {
            let gateway = Gateway::new(Some(&cache_path), false).unwrap();
            gateway.complete(&spec, &ask("q1")).unwrap();
        }
        // Simulate a crash mid-append.
        let mut file = OpenOptions::new().append(true).open(&cache_path).unwrap();
        file.write_all(b"{\"key\": \"abc, truncat").unwrap();
        drop(file);
        let gateway = Gateway::new(Some(&cache_path), false).unwrap();
        assert_eq!(gateway.cache_len(), 1);
        assert!(gateway.complete(&spec, &ask("q1")).unwrap().cache_hit);
    }

    #[test]
    fn replay_mode_with_cold_cache_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cache_path = dir.path().join("cache.jsonl");
        let gateway = Gateway::new(Some(&cache_path), false).unwrap();
        let spec = ModelSpec {
            endpoint: "replay:".to_string(),
            ..ModelSpec::mock("replayed", Path::new("unused"))
        };
        let err = gateway.complete(&spec, &ask("q")).unwrap_err();
        assert!(matches!(err, GatewayError::CacheMissInReplayOnlyMode));
    }

    #[test]
    fn offline_flag_forces_replay_for_mock_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Yes")]);
        let cache_path = dir.path().join("cache.jsonl");
        {
            let gateway = Gateway::new(Some(&cache_path), false).unwrap();
            gateway.complete(&spec, &ask("warm")).unwrap();
        }
        let gateway = Gateway::new(Some(&cache_path), true).unwrap();
        assert!(gateway.complete(&spec, &ask("warm")).unwrap().cache_hit);
        assert!(matches!(
            gateway.complete(&spec, &ask("cold")),
            Err(GatewayError::CacheMissInReplayOnlyMode)
        ));
    }

    #[test]
    fn bad_endpoint_is_rejected() {
        let gateway = Gateway::new(None, false).unwrap();
        let spec = ModelSpec {
            endpoint: "ftp://nope".to_string(),
            ..ModelSpec::mock("m", Path::new("unused"))
        };
        assert!(matches!(
            gateway.complete(&spec, &ask("q")),
            Err(GatewayError::BadEndpoint(_))
        ));
    }

    #[test]
    fn conversations_must_alternate() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Yes")]);
        let gateway = Gateway::new(None, false).unwrap();
        let bad = vec![Message::user("a"), Message::user("b")];
        assert!(matches!(
            gateway.complete(&spec, &bad),
            Err(GatewayError::InvalidConversation)
        ));
        let good = vec![
            Message::system("be terse"),
            Message::user("a"),
            Message::assistant("b"),
            Message::user("c"),
        ];
        assert!(gateway.complete(&spec, &good).is_ok());
    }

    #[test]
    fn batch_preserves_order_and_aggregates_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("alpha", "A"), ("beta", "B")]);
        let gateway = Gateway::new(None, false).unwrap();
        let conversations: Vec<Conversation> = vec![
            ask("alpha one"),
            ask("beta two"),
            vec![Message::assistant("broken")],
            ask("alpha three"),
        ];
        let results = gateway.complete_batch(&spec, &conversations);
        assert_eq!(results.len(), 4);
        assert_eq!(results[0].as_ref().unwrap().raw_response, "A");
        assert_eq!(results[1].as_ref().unwrap().raw_response, "B");
        assert!(results[2].is_err());
        assert_eq!(results[3].as_ref().unwrap().raw_response, "A");
    }

    #[test]
    fn batch_of_cached_items_makes_no_backend_calls() {
        let dir = tempfile::tempdir().unwrap();
        let spec = mock_spec(dir.path(), &[("", "Yes")]);
        let cache_path = dir.path().join("cache.jsonl");
        let conversations: Vec<Conversation> = (0..8).map(|i| ask(&format!("q{i}"))).collect();
        {
            let gateway = Gateway::new(Some(&cache_path), false).unwrap();
            gateway.complete_batch(&spec, &conversations);
        }
        let gateway = Gateway::new(Some(&cache_path), false).unwrap();
        let results = gateway.complete_batch(&spec, &conversations);
        assert!(results.iter().all(|r| r.as_ref().unwrap().cache_hit));
        let stats = gateway.stats();
        assert_eq!(stats.backend_calls, 0);
        assert_eq!(stats.cache_hits, 8);
    }

    #[test]
    fn cache_keys_differ_on_any_content_change() {
        let spec_a = ModelSpec::mock("a", Path::new("s"));
        let mut spec_b = spec_a.clone();
        let conv = ask("question");
        assert_eq!(cache_key(&spec_a, &conv), cache_key(&spec_a, &conv));
        spec_b.name = "b".to_string();
        assert_ne!(cache_key(&spec_a, &conv), cache_key(&spec_b, &conv));
        let mut spec_c = spec_a.clone();
        spec_c.temperature = 0.5;
        assert_ne!(cache_key(&spec_a, &conv), cache_key(&spec_c, &conv));
        assert_ne!(
            cache_key(&spec_a, &conv),
            cache_key(&spec_a, &ask("question!"))
        );
    }
}
