//! Completion service client with live, replay and mock backends.

mod live;
mod mock;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::{PromptKind, PromptText};

pub use live::{LiveBackend, LiveConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use mock::{MockBackend, MockEntry, MockFallback, MockTable, Selector};

/// Replies longer than this are rejected rather than truncated.
pub const MAX_REPLY_BYTES: usize = 512 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            model: "default".into(),
            temperature: 0.0,
            max_tokens: 4096,
            timeout_secs: 120,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendTag {
    Live,
    Replay,
    Mock,
}

impl BackendTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendTag::Live => "live",
            BackendTag::Replay => "replay",
            BackendTag::Mock => "mock",
        }
    }
}

impl std::str::FromStr for BackendTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(BackendTag::Live),
            "replay" => Ok(BackendTag::Replay),
            "mock" => Ok(BackendTag::Mock),
            other => Err(format!("unknown backend `{other}` (expected live, replay or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub lang: Option<String>,
    pub code: String,
    /// Byte range of `code` inside the raw reply.
    pub range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    pub raw: String,
    pub blocks: Vec<CodeBlock>,
    pub backend: BackendTag,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("completion service unavailable after {attempts} attempts: {message}")]
    ServiceUnavailable { attempts: u32, message: String },
    #[error("no cached reply for prompt {key}")]
    CacheMiss { key: String },
    #[error("no mock fixture matches prompt {key}")]
    MockMiss { key: String },
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw completion transport.
pub trait Backend: Send + Sync {
    fn tag(&self) -> BackendTag;
    fn complete_raw(&self, key: &str, prompt: &PromptText, params: &GenerationParams) -> Result<String, LlmError>;
}

/// Stable content hash of a prompt and the parameters that influence the
/// reply.
pub fn cache_key(prompt: &PromptText, params: &GenerationParams) -> String {
    let mut h = Sha256::new();
    h.update(b"prompt\0");
    h.update(prompt.rendered.as_bytes());
    h.update(b"\0model\0");
    h.update(params.model.as_bytes());
    h.update(b"\0temperature\0");
    h.update(params.temperature.to_bits().to_le_bytes());
    h.update(b"\0max_tokens\0");
    h.update(params.max_tokens.to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub kind: PromptKind,
    pub reply: String,
}

/// One JSON file per reply, written atomically.
#[derive(Debug, Clone)]
pub struct ReplayCache {
    dir: PathBuf,
}

impl ReplayCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayCache { dir: dir.into() }
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        write_atomic(&self.path(&entry.key), &serde_json::to_string_pretty(entry).unwrap())
    }
}

pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub index: usize,
    pub program: String,
    pub kind: PromptKind,
    pub key: String,
    pub backend: BackendTag,
    pub cached: bool,
    pub prompt: String,
    pub reply: String,
}

struct Limiter {
    cap: usize,
    busy: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut busy = self.busy.lock().unwrap();
        while *busy >= self.cap {
            busy = self.cv.wait(busy).unwrap();
        }
        *busy += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap() -= 1;
        self.0.cv.notify_one();
    }
}

/// Shared client. Replies are looked up in the replay cache first; misses go
/// to the backend unless the gateway is in strict replay mode.
pub struct Gateway {
    backend: Option<Box<dyn Backend>>,
    cache: Option<ReplayCache>,
    strict_replay: bool,
    log_root: Option<PathBuf>,
    counters: Mutex<HashMap<String, usize>>,
    /// Call logs already present per program when first seen.
    log_base: Mutex<HashMap<String, usize>>,
    limiter: Limiter,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.as_ref().map(|b| b.tag()))
            .field("strict_replay", &self.strict_replay)
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Gateway {
            backend: Some(backend),
            cache: None,
            strict_replay: false,
            log_root: None,
            counters: Mutex::new(HashMap::new()),
            log_base: Mutex::new(HashMap::new()),
            limiter: Limiter {
                cap: 4,
                busy: Mutex::new(0),
                cv: Condvar::new(),
            },
        }
    }

    pub fn mock(table: MockTable) -> Self {
        Gateway::new(Box::new(MockBackend::new(table)))
    }

    /// Cache-only gateway: unseen prompts fail with `CacheMiss`.
    pub fn replay(cache: ReplayCache) -> Self {
        Gateway {
            backend: None,
            cache: Some(cache),
            strict_replay: true,
            ..Gateway::new(Box::new(MockBackend::new(MockTable::default())))
        }
    }

    pub fn with_cache(mut self, cache: ReplayCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Persist every call as `<root>/<program>/NNNN.json` and every prompt
    /// as `<prompts>/<program>/NNNN-<kind>.txt` where `prompts` is the
    /// sibling `prompts` directory of `root`. Numbering continues after
    /// logs already in the directory.
    pub fn with_log_dir(mut self, root: impl Into<PathBuf>) -> Self {
        self.log_root = Some(root.into());
        self
    }

    pub fn with_concurrency(mut self, cap: usize) -> Self {
        self.limiter.cap = cap.max(1);
        self
    }

    pub fn tag(&self) -> BackendTag {
        match &self.backend {
            Some(b) if !self.strict_replay => b.tag(),
            _ => BackendTag::Replay,
        }
    }

    /// Number of `complete` calls made for `program`.
    pub fn calls(&self, program: &str) -> usize {
        self.counters.lock().unwrap().get(program).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.counters.lock().unwrap().values().sum()
    }

    pub fn complete(&self, program: &str, prompt: &PromptText, params: &GenerationParams) -> Result<ModelReply, LlmError> {
        let index = {
            let mut c = self.counters.lock().unwrap();
            let n = c.entry(program.to_string()).or_insert(0);
            *n += 1;
            *n
        };
        let key = cache_key(prompt, params);
        let start = Instant::now();
        let cached = self.cache.as_ref().and_then(|c| c.get(&key));
        let (raw, backend, was_cached) = match cached {
            Some(e) => (e.reply, BackendTag::Replay, true),
            None => {
                if self.strict_replay {
                    return Err(LlmError::CacheMiss { key });
                }
                let b = self
                    .backend
                    .as_ref()
                    .ok_or_else(|| LlmError::NotConfigured("no backend".into()))?;
                let raw = {
                    let _slot = self.limiter.acquire();
                    b.complete_raw(&key, prompt, params)?
                };
                if let Some(c) = &self.cache {
                    c.put(&CacheEntry {
                        key: key.clone(),
                        kind: prompt.kind,
                        reply: raw.clone(),
                    })?;
                }
                (raw, b.tag(), false)
            }
        };
        if raw.len() > MAX_REPLY_BYTES {
            return Err(LlmError::MalformedReply(format!(
                "reply of {} bytes exceeds the {MAX_REPLY_BYTES}-byte limit",
                raw.len()
            )));
        }
        let blocks = parse_blocks(&raw)?;
        if let Some(root) = &self.log_root {
            let base = *self.log_base.lock().unwrap().entry(program.to_string()).or_insert_with(|| {
                std::fs::read_dir(root.join(program))
                    .map(|d| {
                        d.filter_map(Result::ok)
                            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                            .count()
                    })
                    .unwrap_or(0)
            });
            self.log(root, base + index, program, prompt, &key, backend, was_cached, &raw)?;
        }
        Ok(ModelReply {
            raw,
            blocks,
            backend,
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &self,
        root: &Path,
        index: usize,
        program: &str,
        prompt: &PromptText,
        key: &str,
        backend: BackendTag,
        cached: bool,
        raw: &str,
    ) -> std::io::Result<()> {
        let rec = CallRecord {
            index,
            program: program.to_string(),
            kind: prompt.kind,
            key: key.to_string(),
            backend,
            cached,
            prompt: prompt.rendered.clone(),
            reply: raw.to_string(),
        };
        write_atomic(
            &root.join(program).join(format!("{index:04}.json")),
            &serde_json::to_string_pretty(&rec).unwrap(),
        )?;
        if let Some(session) = root.parent() {
            write_atomic(
                &session
                    .join("prompts")
                    .join(program)
                    .join(format!("{index:04}-{}.txt", prompt.kind.as_str())),
                &prompt.rendered,
            )?;
        }
        Ok(())
    }
}

/// Fenced code blocks in order. An unterminated fence is an error.
pub fn parse_blocks(raw: &str) -> Result<Vec<CodeBlock>, LlmError> {
    let mut blocks = Vec::new();
    let mut open: Option<(Option<String>, usize)> = None;
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        let trimmed = line.trim();
        match &open {
            None => {
                if let Some(rest) = trimmed.strip_prefix("```") {
                    let lang = rest.trim();
                    open = Some(((!lang.is_empty()).then(|| lang.to_string()), offset + line.len()));
                }
            }
            Some((lang, start)) => {
                if trimmed == "```" {
                    let end = offset.max(*start);
                    let code_end = if end > *start && raw.as_bytes()[end - 1] == b'\n' {
                        end - 1
                    } else {
                        end
                    };
                    blocks.push(CodeBlock {
                        lang: lang.clone(),
                        code: raw[*start..code_end].to_string(),
                        range: (*start, code_end),
                    });
                    open = None;
                }
            }
        }
        offset += line.len();
    }
    if open.is_some() {
        return Err(LlmError::MalformedReply("unterminated code fence".into()));
    }
    Ok(blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Single,
    Pair,
}

/// The payload blocks of a reply: the first block, or exactly two blocks
/// labelled (original, modified).
pub fn extract_code(reply: &ModelReply, expect: Expect) -> Result<Vec<CodeBlock>, LlmError> {
    match expect {
        Expect::Single => reply
            .blocks
            .first()
            .cloned()
            .map(|b| vec![b])
            .ok_or_else(|| LlmError::MalformedReply("expected a code block, found none".into())),
        Expect::Pair => {
            if reply.blocks.len() == 2 {
                Ok(reply.blocks.clone())
            } else {
                Err(LlmError::MalformedReply(format!(
                    "expected original and modified code blocks, found {}",
                    reply.blocks.len()
                )))
            }
        }
    }
}

/// Code of the first fenced block in a prompt section body.
pub fn first_block(body: &str) -> Option<String> {
    parse_blocks(body).ok()?.into_iter().next().map(|b| b.code)
}

/// Gateway selected by backend tag. Live needs its environment variables;
/// replay reads `<session>/llm/cache`; mock uses `table`.
pub fn gateway_for(tag: BackendTag, session: &Path, table: Option<MockTable>, jobs: usize) -> Result<Gateway, LlmError> {
    let cache = ReplayCache::new(session.join("llm").join("cache"));
    let gw = match tag {
        BackendTag::Live => {
            let cfg = LiveConfig::from_env().ok_or_else(|| {
                LlmError::NotConfigured(format!("set {} to use the live backend", live::ENV_ENDPOINT))
            })?;
            Gateway::new(Box::new(LiveBackend::new(cfg)?)).with_cache(cache)
        }
        BackendTag::Replay => Gateway::replay(cache),
        BackendTag::Mock => Gateway::mock(table.unwrap_or_default()).with_cache(cache),
    };
    Ok(gw.with_log_dir(session.join("llm")).with_concurrency(jobs))
}

pub(crate) fn backoff(attempt: u32) -> Duration {
    Duration::from_millis(500u64 << attempt.min(6))
}
