//! LLM providers: a live chat-completions client and offline replay.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProviderIdentity {
    pub kind: String,
    pub model: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl ProviderIdentity {
    pub fn new(kind: &str, model: &str) -> Self {
        ProviderIdentity {
            kind: kind.to_string(),
            model: model.to_string(),
            parameters: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider returned {status:?}: {excerpt}")]
    ProviderError { status: Option<u16>, excerpt: String },
    #[error("no recorded response for prompt hash {hash}")]
    ReplayMiss { hash: String },
    #[error("provider misconfigured: {0}")]
    Config(String),
}

pub trait Provider: Send + Sync {
    fn identity(&self) -> ProviderIdentity;
    fn generate(&self, prompt: &str) -> Result<String, ProviderError>;
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// On-disk replay fixture: every response recorded for one prompt, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Serves `<dir>/<sha256(prompt)>.json` responses in recorded order; a
/// prompt asked more often than it was recorded is a miss.
pub struct ReplayProvider {
    dir: PathBuf,
    model: String,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayProvider {
            dir: dir.into(),
            model: "replay".to_string(),
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Reports `model` as the identity's model name.
    pub fn with_model(mut self, model: &str) -> Self {
        self.model = model.to_string();
        self
    }
}

impl Provider for ReplayProvider {
    fn identity(&self) -> ProviderIdentity {
        ProviderIdentity::new("replay", &self.model)
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let hash = prompt_hash(prompt);
        let miss = || ProviderError::ReplayMiss { hash: hash.clone() };
        let text = fs::read_to_string(self.dir.join(format!("{hash}.json"))).map_err(|_| miss())?;
        let entry: ReplayEntry = serde_json::from_str(&text).map_err(|e| {
            ProviderError::Config(format!("replay fixture {hash}.json is malformed: {e}"))
        })?;
        let mut cursors = self.cursors.lock().expect("replay cursor lock");
        let cursor = cursors.entry(hash.clone()).or_insert(0);
        let response = entry.responses.get(*cursor).cloned().ok_or_else(miss)?;
        *cursor += 1;
        Ok(response)
    }
}

/// Appends each response of the wrapped provider to a replay directory.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
    lock: Mutex<()>,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider {
            inner,
            dir: dir.into(),
            lock: Mutex::new(()),
        }
    }

    fn record(&self, prompt: &str, response: &str) -> Result<(), ProviderError> {
        let _guard = self.lock.lock().expect("recording lock");
        let io = |e: std::io::Error| ProviderError::Config(format!("cannot record fixture: {e}"));
        fs::create_dir_all(&self.dir).map_err(io)?;
        let path = self.dir.join(format!("{}.json", prompt_hash(prompt)));
        let mut entry = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?,
            Err(_) => ReplayEntry {
                prompt: prompt.to_string(),
                responses: Vec::new(),
            },
        };
        entry.responses.push(response.to_string());
        let text = serde_json::to_string_pretty(&entry).expect("replay entry serializes");
        fs::write(&path, text + "\n").map_err(io)
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn identity(&self) -> ProviderIdentity {
        self.inner.identity()
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let response = self.inner.generate(prompt)?;
        self.record(prompt, &response)?;
        Ok(response)
    }
}

/// Returns canned responses in call order regardless of the prompt; once
/// exhausted every call is a miss.
pub struct ScriptedProvider {
    responses: Mutex<std::collections::VecDeque<String>>,
}

impl ScriptedProvider {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(responses: I) -> Self {
        ScriptedProvider {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl Provider for ScriptedProvider {
    fn identity(&self) -> ProviderIdentity {
        ProviderIdentity::new("scripted", "scripted")
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        self.responses
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| ProviderError::ReplayMiss {
                hash: prompt_hash(prompt),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    /// Minimum spacing between request starts.
    pub min_interval: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o".to_string(),
            temperature: 0.2,
            max_tokens: 2048,
            timeout: Duration::from_secs(120),
            max_retries: 4,
            backoff: Duration::from_millis(500),
            min_interval: Duration::ZERO,
        }
    }
}

/// OpenAI-compatible chat-completions client with bounded exponential backoff
/// on 429 and 5xx responses.
pub struct LiveProvider {
    config: LiveConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    last_request: Mutex<Option<Instant>>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

fn excerpt(text: &str) -> String {
    text.chars().take(300).collect()
}

impl LiveProvider {
    pub fn new(config: LiveConfig, api_key: String) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(LiveProvider {
            config,
            api_key,
            client,
            last_request: Mutex::new(None),
        })
    }

    /// Reads the API key from the environment variable `key_env`.
    pub fn from_env(config: LiveConfig, key_env: &str) -> Result<Self, ProviderError> {
        let key = std::env::var(key_env).map_err(|_| {
            ProviderError::Config(format!("environment variable {key_env} is not set"))
        })?;
        Self::new(config, key)
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().expect("rate limit lock");
        if let Some(prev) = *last {
            let wait = self.config.min_interval.saturating_sub(prev.elapsed());
            if !wait.is_zero() {
                thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }

    fn once(&self, prompt: &str) -> Result<String, (bool, ProviderError)> {
        self.pace();
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                let retry = e.is_timeout() || e.is_connect();
                (
                    retry,
                    ProviderError::ProviderError {
                        status: None,
                        excerpt: excerpt(&e.to_string()),
                    },
                )
            })?;
        let status = response.status();
        let text = response.text().unwrap_or_default();
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            return Err((
                retry,
                ProviderError::ProviderError {
                    status: Some(status.as_u16()),
                    excerpt: excerpt(&text),
                },
            ));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
            (
                false,
                ProviderError::ProviderError {
                    status: Some(status.as_u16()),
                    excerpt: excerpt(&format!("unparseable completion ({e}): {text}")),
                },
            )
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                (
                    false,
                    ProviderError::ProviderError {
                        status: Some(status.as_u16()),
                        excerpt: "completion has no message content".into(),
                    },
                )
            })
    }
}

impl Provider for LiveProvider {
    fn identity(&self) -> ProviderIdentity {
        let mut id = ProviderIdentity::new("live", &self.config.model);
        id.parameters
            .insert("temperature".into(), self.config.temperature.to_string());
        id.parameters
            .insert("max_tokens".into(), self.config.max_tokens.to_string());
        id
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut attempt = 0;
        loop {
            match self.once(prompt) {
                Ok(text) => {
                    if attempt > 0 {
                        tracing::info!(retries = attempt, "completion succeeded after retries");
                    }
                    return Ok(text);
                }
                Err((true, e)) if attempt < self.config.max_retries => {
                    let wait = self.config.backoff * 2u32.saturating_pow(attempt);
                    attempt += 1;
                    tracing::warn!(retry = attempt, ?wait, error = %e, "retrying completion");
                    thread::sleep(wait);
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

/// Reads every fixture in a replay directory, keyed by file stem.
pub fn load_replay_dir(dir: &Path) -> std::io::Result<BTreeMap<String, ReplayEntry>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path)?;
            if let Ok(parsed) = serde_json::from_str::<ReplayEntry>(&text) {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                out.insert(stem, parsed);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn replay_serves_in_order_then_misses() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingProvider::new(ScriptedProvider::new(["one", "two"]), dir.path());
        assert_eq!(rec.generate("p").unwrap(), "one");
        assert_eq!(rec.generate("p").unwrap(), "two");

        let replay = ReplayProvider::new(dir.path());
        assert_eq!(replay.generate("p").unwrap(), "one");
        assert_eq!(replay.generate("p").unwrap(), "two");
        assert_eq!(
            replay.generate("p"),
            Err(ProviderError::ReplayMiss {
                hash: prompt_hash("p")
            })
        );
        assert!(matches!(replay.generate("other"), Err(ProviderError::ReplayMiss { .. })));
        assert_eq!(load_replay_dir(dir.path()).unwrap().len(), 1);
    }

    fn respond(stream: &mut std::net::TcpStream, status: &str, body: &str) {
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut body_in = vec![0u8; length];
        reader.read_exact(&mut body_in).unwrap();
        write!(
            stream,
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
    }

    #[test]
    fn live_retries_after_429() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let (mut first, _) = listener.accept().unwrap();
            respond(&mut first, "429 Too Many Requests", "{\"error\":\"slow down\"}");
            let (mut second, _) = listener.accept().unwrap();
            respond(
                &mut second,
                "200 OK",
                "{\"choices\":[{\"message\":{\"role\":\"assistant\",\"content\":\"hello\"}}]}",
            );
        });
        let config = LiveConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            backoff: Duration::from_millis(1),
            ..LiveConfig::default()
        };
        let live = LiveProvider::new(config, "test-key".into()).unwrap();
        assert_eq!(live.generate("hi").unwrap(), "hello");
        server.join().unwrap();
        assert_eq!(live.identity().kind, "live");
    }

    #[test]
    fn live_gives_up_on_client_errors() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            respond(&mut s, "401 Unauthorized", "{\"error\":\"bad key\"}");
        });
        let config = LiveConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            backoff: Duration::from_millis(1),
            ..LiveConfig::default()
        };
        let live = LiveProvider::new(config, "k".into()).unwrap();
        match live.generate("hi") {
            Err(ProviderError::ProviderError { status, excerpt }) => {
                assert_eq!(status, Some(401));
                assert!(excerpt.contains("bad key"));
            }
            other => panic!("{other:?}"),
        }
        server.join().unwrap();
    }
}
