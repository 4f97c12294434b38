//! Unit-norm text embeddings behind a pluggable provider.
//!
//! Two providers satisfy the same contract ("one unit vector per text"):
//!
//! * `Hashing` — a deterministic local feature-hashing embedder for offline
//!   runs and tests. Tokens are lowercased, split on non-alphanumeric
//!   characters, hashed with FNV-1a 64 (XORed with the seed), and signed-added
//!   into a D-dimensional vector which is then L2-normalized. A text with no
//!   tokens maps to the first basis vector and logs a warning.
//! * `Remote` — an HTTP client for an embedding service. Responses are
//!   L2-normalized locally regardless of what the service returns.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the bearer token for the remote provider.
pub const EMBED_TOKEN_ENV: &str = "OPTAVAIL_EMBED_TOKEN";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// A dense unit-norm vector. Cosine similarity between two of these is a
/// plain dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f32>);

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("empty text batch")]
    EmptyBatch,
    #[error("embedding dimension {0} below minimum 8")]
    DimensionTooSmall(usize),
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("remote provider requires an endpoint")]
    MissingEndpoint,
    #[error("remote embedding request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("remote service returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("remote service returned a zero vector at position {0}")]
    ZeroVector(usize),
}

impl EmbeddingVector {
    /// L2-normalizes `values` into a unit vector. A zero vector has no
    /// direction and is rejected.
    pub fn normalized(values: Vec<f32>) -> Option<Self> {
        let norm = l2_norm(&values);
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        let scaled = values.iter().map(|v| (*v as f64 / norm) as f32).collect();
        Some(Self(scaled))
    }

    /// Wraps values persisted by this crate without re-normalizing, so a
    /// load reproduces the saved bits exactly.
    pub(crate) fn from_stored(values: Vec<f32>) -> Self {
        Self(values)
    }

    /// The first basis vector e0, the deterministic fallback for inputs
    /// that produce no tokens.
    pub fn basis0(dimension: usize) -> Self {
        let mut values = vec![0.0; dimension];
        values[0] = 1.0;
        Self(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Euclidean norm, 1.0 within 1e-6 by construction.
    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

fn l2_norm(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|v| {
            let v = *v as f64;
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity of two unit vectors: their dot product, clamped into
/// [-1, 1] against floating-point drift.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    Ok(dot(a.values(), b.values()))
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x as f64 * *y as f64;
    }
    acc.clamp(-1.0, 1.0)
}

/// Which embedding backend to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Remote,
    Hashing,
}

/// Provider selection plus everything needed to make it deterministic
/// (dimension and seed for hashing) or reachable (endpoint for remote).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProviderConfig {
    pub kind: ProviderKind,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub seed: u64,
}

impl EmbeddingProviderConfig {
    pub fn hashing(dimension: usize, seed: u64) -> Self {
        Self {
            kind: ProviderKind::Hashing,
            dimension,
            endpoint: None,
            batch_size: 64,
            seed,
        }
    }

    pub fn remote(dimension: usize, endpoint: impl Into<String>, batch_size: usize) -> Self {
        Self {
            kind: ProviderKind::Remote,
            dimension,
            endpoint: Some(endpoint.into()),
            batch_size,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension < 8 {
            return Err(EmbeddingError::DimensionTooSmall(self.dimension));
        }
        if self.batch_size == 0 {
            return Err(EmbeddingError::ZeroBatchSize);
        }
        if self.kind == ProviderKind::Remote && self.endpoint.is_none() {
            return Err(EmbeddingError::MissingEndpoint);
        }
        Ok(())
    }
}

/// A ready-to-use embedding backend built from a config. The hashing
/// provider is pure; the remote provider holds an HTTP client and retries
/// transient failures with exponential backoff before surfacing them.
pub struct EmbeddingProvider {
    config: EmbeddingProviderConfig,
    http: Option<reqwest::blocking::Client>,
    token: Option<String>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

const REMOTE_MAX_ATTEMPTS: u32 = 3;
const REMOTE_BACKOFF_BASE_MS: u64 = 200;

impl EmbeddingProvider {
    pub fn new(config: EmbeddingProviderConfig) -> Result<Self, EmbeddingError> {
        config.validate()?;
        let http = match config.kind {
            ProviderKind::Hashing => None,
            ProviderKind::Remote => Some(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(60))
                    .build()
                    .map_err(|err| EmbeddingError::Transport {
                        attempts: 0,
                        message: err.to_string(),
                    })?,
            ),
        };
        let token = std::env::var(EMBED_TOKEN_ENV).ok();
        Ok(Self {
            config,
            http,
            token,
        })
    }

    pub fn config(&self) -> &EmbeddingProviderConfig {
        &self.config
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    /// Embeds a batch of texts, one unit vector per text in input order.
    /// Large batches are split into `batch_size` chunks.
    pub fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Err(EmbeddingError::EmptyBatch);
        }
        if texts.iter().any(|t| t.is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        match self.config.kind {
            ProviderKind::Hashing => Ok(texts
                .iter()
                .map(|t| hash_embed(t, self.config.dimension, self.config.seed))
                .collect()),
            ProviderKind::Remote => {
                let mut out = Vec::with_capacity(texts.len());
                for chunk in texts.chunks(self.config.batch_size) {
                    out.extend(self.embed_remote_chunk(chunk)?);
                }
                Ok(out)
            }
        }
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let batch = self.embed_batch(std::slice::from_ref(&text.to_string()))?;
        Ok(batch.into_iter().next().expect("one vector per text"))
    }

    fn embed_remote_chunk(&self, chunk: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let endpoint = self.config.endpoint.as_deref().expect("validated");
        let client = self.http.as_ref().expect("remote client built");
        let mut last_error = String::new();
        for attempt in 1..=REMOTE_MAX_ATTEMPTS {
            let mut request = client.post(endpoint).json(&EmbedRequest { texts: chunk });
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            match request.send().and_then(|r| r.error_for_status()) {
                Ok(response) => {
                    let body: EmbedResponse =
                        response.json().map_err(|err| EmbeddingError::Transport {
                            attempts: attempt,
                            message: format!("invalid response body: {err}"),
                        })?;
                    return self.normalize_response(chunk.len(), body);
                }
                Err(err) => {
                    last_error = err.to_string();
                    if attempt < REMOTE_MAX_ATTEMPTS {
                        let backoff = REMOTE_BACKOFF_BASE_MS << (attempt - 1);
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(EmbeddingError::Transport {
            attempts: REMOTE_MAX_ATTEMPTS,
            message: last_error,
        })
    }

    /// Contract enforcement at the boundary: count check, then local
    /// L2-normalization of every returned vector.
    fn normalize_response(
        &self,
        expected: usize,
        body: EmbedResponse,
    ) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if body.embeddings.len() != expected {
            return Err(EmbeddingError::CountMismatch {
                expected,
                got: body.embeddings.len(),
            });
        }
        body.embeddings
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                EmbeddingVector::normalized(values).ok_or(EmbeddingError::ZeroVector(i))
            })
            .collect()
    }
}

/// Convenience wrapper matching the module contract: build a provider from
/// the config and embed one batch.
pub fn embed_batch(
    texts: &[String],
    config: &EmbeddingProviderConfig,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    EmbeddingProvider::new(config.clone())?.embed_batch(texts)
}

/// FNV-1a 64-bit over `bytes`.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in bytes {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// The deterministic hashing embedder: a pure function of
/// (text, dimension, seed), byte-identical across runs and platforms.
fn hash_embed(text: &str, dimension: usize, seed: u64) -> EmbeddingVector {
    let mut accum = vec![0.0f32; dimension];
    let mut any_token = false;
    for token in text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        any_token = true;
        let h = fnv1a64(token.as_bytes()) ^ seed;
        let bucket = (h % dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        accum[bucket] += sign;
    }
    if !any_token {
        log::warn!("text {text:?} produced no tokens; embedding as basis vector e0");
        return EmbeddingVector::basis0(dimension);
    }
    // An even number of opposite-signed collisions can cancel to zero.
    EmbeddingVector::normalized(accum).unwrap_or_else(|| {
        log::warn!("hashed tokens cancelled to a zero vector; falling back to e0");
        EmbeddingVector::basis0(dimension)
    })
}
