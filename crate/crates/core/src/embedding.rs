//! Text embeddings for persona affinity.
//!
//! The baseline embedder hashes lowercase character 3-grams into a fixed
//! number of buckets (FNV-1a, 64 bit) and L2-normalizes the counts. It is a
//! pure function of the input bytes. The remote embedder posts batches to an
//! HTTP service speaking `{"texts": [...]} -> {"vectors": [[...], ...]}`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIMENSION: usize = 256;
pub const ENDPOINT_ENV: &str = "TRIPGRADE_EMBED_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { values, norm }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedding service unavailable (status {status:?}): {message}")]
    RemoteUnavailable {
        status: Option<u16>,
        message: String,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("text {0} is empty")]
    EmptyText(usize),
    #[error("no texts to embed")]
    EmptyInput,
    #[error("remote embedding requires an endpoint (--embed-endpoint or {ENDPOINT_ENV})")]
    MissingEndpoint,
}

/// Anything that turns a batch of texts into vectors of one dimension.
///
/// Implementations must be callable from several threads at once.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

fn check_texts(texts: &[&str]) -> Result<(), EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    match texts.iter().position(|t| t.trim().is_empty()) {
        Some(i) => Err(EmbedError::EmptyText(i)),
        None => Ok(()),
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineEmbedder {
    pub dimension: usize,
}

impl Default for BaselineEmbedder {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl BaselineEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    /// Embeds one text. Texts shorter than three characters map to zero.
    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut counts = vec![0.0; self.dimension];
        let mut buf = String::new();
        for gram in chars.windows(3) {
            buf.clear();
            buf.extend(gram);
            counts[(fnv1a64(buf.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|c: &f64| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut counts {
                *c /= norm;
            }
            EmbeddingVector {
                values: counts,
                norm: 1.0,
            }
        } else {
            EmbeddingVector {
                values: counts,
                norm: 0.0,
            }
        }
    }
}

impl Embedder for BaselineEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_texts(texts)?;
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Self {
            free: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
            while *free == 0 {
                free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.cv.notify_one();
        out
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct RemoteEmbedder {
    endpoint: String,
    agent: ureq::Agent,
    gate: Gate,
    attempts: u32,
    backoff: Duration,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
            gate: Gate::new(max_in_flight),
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }

    /// Overrides the delay before the first retry (doubles after each).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let unavailable =
            |status, message: String| EmbedError::RemoteUnavailable { status, message };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(RemoteRequest { texts })
            .map_err(|e| unavailable(None, e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(unavailable(Some(status), format!("HTTP {status}")));
        }
        let body: RemoteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| unavailable(Some(status), format!("bad response body: {e}")))?;
        Ok(body.vectors)
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_texts(texts)?;
        let vectors = self.gate.run(|| {
            let mut delay = self.backoff;
            let mut last = None;
            for i in 0..self.attempts {
                if i > 0 {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                match self.attempt(texts) {
                    Ok(v) => return Ok(v),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one attempt"))
        })?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::DimensionMismatch {
                expected: texts.len(),
                found: vectors.len(),
            });
        }
        let dim = vectors[0].len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(vectors.into_iter().map(EmbeddingVector::new).collect())
    }
}

/// Uses `primary`, switching to `fallback` when the primary is unreachable.
pub struct FallbackEmbedder<P, F> {
    primary: P,
    fallback: F,
    used_fallback: AtomicBool,
}

impl<P: Embedder, F: Embedder> FallbackEmbedder<P, F> {
    pub fn new(primary: P, fallback: F) -> Self {
        Self {
            primary,
            fallback,
            used_fallback: AtomicBool::new(false),
        }
    }

    pub fn used_fallback(&self) -> bool {
        self.used_fallback.load(Ordering::Relaxed)
    }
}

impl<P: Embedder, F: Embedder> Embedder for FallbackEmbedder<P, F> {
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        match self.primary.embed(texts) {
            Err(EmbedError::RemoteUnavailable { .. }) => {
                self.used_fallback.store(true, Ordering::Relaxed);
                self.fallback.embed(texts)
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub mode: EmbedMode,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    /// Fall back to the baseline when the remote service fails.
    pub fallback: bool,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            mode: EmbedMode::Baseline,
            dimension: DEFAULT_DIMENSION,
            endpoint: None,
            timeout_secs: 30.0,
            max_in_flight: 4,
            fallback: false,
        }
    }
}

impl EmbedderConfig {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            mode: EmbedMode::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        match self.mode {
            EmbedMode::Baseline => Ok(Box::new(BaselineEmbedder::new(self.dimension))),
            EmbedMode::Remote => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .filter(|e| !e.trim().is_empty())
                    .ok_or(EmbedError::MissingEndpoint)?;
                let remote = RemoteEmbedder::new(
                    endpoint,
                    Duration::from_secs_f64(self.timeout_secs),
                    self.max_in_flight,
                );
                if self.fallback {
                    Ok(Box::new(FallbackEmbedder::new(
                        remote,
                        BaselineEmbedder::new(self.dimension),
                    )))
                } else {
                    Ok(Box::new(remote))
                }
            }
        }
    }
}

pub fn embed_texts(
    texts: &[&str],
    config: &EmbedderConfig,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    config.build()?.embed(texts)
}

/// Cosine of the angle between `a` and `b`; 0 when either is the zero vector.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}
