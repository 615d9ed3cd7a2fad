use super::template::{CHAIN_CLOSE, CHAIN_OPEN};
use crate::digest::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self { max_tokens: 1024, temperature: 0.0 }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClientError {
    /// Retryable failure; `attempts` calls were made.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion: {0}")]
    Content(String),
    #[error("mock client: {0}")]
    Mock(String),
}

pub trait TextGenClient: Send + Sync {
    /// Recorded in provenance.
    fn name(&self) -> String;
    fn complete(&self, prompt: &str, options: &DecodeOptions) -> Result<String, ClientError>;
}

/// The text between the chain markers of a pruning prompt.
pub fn chain_of(prompt: &str) -> Option<&str> {
    let start = prompt.find(CHAIN_OPEN)? + CHAIN_OPEN.len();
    let end = prompt.rfind(CHAIN_CLOSE)?;
    let inner = prompt.get(start..end)?;
    let inner = inner.strip_prefix('\n').unwrap_or(inner);
    Some(inner.strip_suffix('\n').unwrap_or(inner))
}

#[derive(Debug, Clone)]
pub enum MockBehavior {
    /// Always the same text.
    Canned(String),
    /// Looked up by the SHA-256 of the prompt.
    Table { entries: HashMap<String, String>, fallback: Option<String> },
    /// Returns the chain embedded in a pruning prompt unchanged.
    EchoChain,
    /// Returns the embedded chain without lines containing the tag.
    DropLines(String),
    /// Generation prompts become one step per path line plus an
    /// "Additional knowledge" aside; pruning prompts drop those asides.
    Scripted,
}

/// Deterministic stand-in for a language model: a pure function of the prompt.
#[derive(Debug, Clone)]
pub struct MockClient {
    behavior: MockBehavior,
}

pub const ASIDE_TAG: &str = "Additional knowledge";

impl MockClient {
    pub fn new(behavior: MockBehavior) -> Self {
        Self { behavior }
    }

    pub fn canned(text: impl Into<String>) -> Self {
        Self::new(MockBehavior::Canned(text.into()))
    }

    pub fn scripted() -> Self {
        Self::new(MockBehavior::Scripted)
    }

    /// Table keyed by prompt text (hashed on insertion).
    pub fn table<I, P, R>(pairs: I, fallback: Option<String>) -> Self
    where
        I: IntoIterator<Item = (P, R)>,
        P: AsRef<str>,
        R: Into<String>,
    {
        let entries = pairs.into_iter().map(|(p, r)| (sha256_hex(p.as_ref()), r.into())).collect();
        Self::new(MockBehavior::Table { entries, fallback })
    }
}

fn drop_lines(chain: &str, tag: &str) -> String {
    chain.lines().filter(|l| !l.contains(tag)).collect::<Vec<_>>().join("\n")
}

fn is_path_line(line: &str) -> bool {
    ["linear\t", "divergent\t", "convergent\t"].iter().any(|k| line.starts_with(k))
}

fn scripted_chain(prompt: &str) -> String {
    let mut lines = Vec::new();
    for (i, path) in prompt.lines().filter(|l| is_path_line(l)).enumerate() {
        let branches: Vec<&str> = path.split('\t').skip(3).collect();
        lines.push(format!("Step {}: {}", i + 1, branches.join("; ")));
    }
    if lines.is_empty() {
        lines.push("Step 1: No knowledge graph path links the question to the answer.".into());
    }
    lines.push(format!("{ASIDE_TAG}: the entities above are described in standard pharmacology references."));
    match prompt.lines().find_map(|l| l.strip_prefix("Answer:")) {
        Some(answer) => lines.push(format!("Conclusion: the answer is {}.", answer.trim())),
        None => lines.push("Conclusion: the paths support the given answer.".into()),
    }
    lines.join("\n")
}

impl TextGenClient for MockClient {
    fn name(&self) -> String {
        let kind = match &self.behavior {
            MockBehavior::Canned(_) => "canned",
            MockBehavior::Table { .. } => "table",
            MockBehavior::EchoChain => "echo",
            MockBehavior::DropLines(_) => "drop-lines",
            MockBehavior::Scripted => "scripted",
        };
        format!("mock:{kind}")
    }

    fn complete(&self, prompt: &str, _options: &DecodeOptions) -> Result<String, ClientError> {
        let no_chain = || ClientError::Mock("prompt has no chain markers".into());
        match &self.behavior {
            MockBehavior::Canned(t) => Ok(t.clone()),
            MockBehavior::Table { entries, fallback } => entries
                .get(&sha256_hex(prompt))
                .or(fallback.as_ref())
                .cloned()
                .ok_or_else(|| ClientError::Mock("prompt not in table".into())),
            MockBehavior::EchoChain => chain_of(prompt).map(str::to_string).ok_or_else(no_chain),
            MockBehavior::DropLines(tag) => chain_of(prompt).map(|c| drop_lines(c, tag)).ok_or_else(no_chain),
            MockBehavior::Scripted => Ok(match chain_of(prompt) {
                Some(chain) => drop_lines(chain, ASIDE_TAG),
                None => scripted_chain(prompt),
            }),
        }
    }
}

/// Posts `{"prompt", "max_tokens", "temperature"}` as JSON and reads the
/// `text` field of the JSON reply.
#[derive(Debug, Clone)]
pub struct HttpClient {
    url: String,
    token: Option<String>,
    attempts: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpClient {
    /// The bearer token, if any, is read from `token_env` once here.
    pub fn new(url: impl Into<String>, token_env: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            token: std::env::var(token_env).ok().filter(|t| !t.is_empty()),
            attempts: 3,
            backoff: Duration::from_millis(200),
            agent,
        }
    }

    pub fn with_retry(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &str) -> Result<String, Result<ClientError, String>> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| Err(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Err(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Err(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Ok(ClientError::Status { status, body: text }));
        }
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| Ok(ClientError::Content(e.to_string())))?;
        Ok(parsed.text)
    }
}

impl TextGenClient for HttpClient {
    fn name(&self) -> String {
        format!("http:{}", self.url)
    }

    fn complete(&self, prompt: &str, options: &DecodeOptions) -> Result<String, ClientError> {
        let body = serde_json::to_string(&CompletionRequest {
            prompt,
            max_tokens: options.max_tokens,
            temperature: options.temperature,
        })
        .expect("request serializes");
        let mut last = String::new();
        for attempt in 1..=self.attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Ok(fatal)) => return Err(fatal),
                Err(Err(retryable)) => {
                    log::warn!("{}: attempt {attempt}/{} failed: {retryable}", self.url, self.attempts);
                    last = retryable;
                    if attempt < self.attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
                    }
                }
            }
        }
        Err(ClientError::Transport { attempts: self.attempts, message: last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_extraction() {
        let p = "Q\n<<<CHAIN\nline one\nline two\nCHAIN>>>\nend";
        assert_eq!(chain_of(p), Some("line one\nline two"));
        assert_eq!(chain_of("no markers"), None);
    }

    #[test]
    fn mock_behaviours() {
        let o = DecodeOptions::default();
        assert_eq!(MockClient::canned("x").complete("anything", &o).unwrap(), "x");
        let t = MockClient::table([("p1", "c1"), ("p2", "c2")], None);
        assert_eq!(t.complete("p1", &o).unwrap(), "c1");
        assert_eq!(t.complete("p2", &o).unwrap(), "c2");
        assert!(t.complete("p3", &o).is_err());
        let p = "<<<CHAIN\nStep 1: a\nAdditional knowledge: b\nStep 2: c\nCHAIN>>>";
        assert_eq!(MockClient::new(MockBehavior::EchoChain).complete(p, &o).unwrap(), "Step 1: a\nAdditional knowledge: b\nStep 2: c");
        assert_eq!(MockClient::scripted().complete(p, &o).unwrap(), "Step 1: a\nStep 2: c");
    }

    #[test]
    fn scripted_generation_uses_path_lines() {
        let prompt = "Answer: multiple sclerosis\nlinear\td=1\tBasic\tDalfampridine -[indication]-> multiple sclerosis\n";
        let chain = MockClient::scripted().complete(prompt, &DecodeOptions::default()).unwrap();
        assert!(chain.starts_with("Step 1: Dalfampridine -[indication]-> multiple sclerosis"));
        assert!(chain.contains(ASIDE_TAG));
        assert!(chain.ends_with("the answer is multiple sclerosis."));
    }
}
