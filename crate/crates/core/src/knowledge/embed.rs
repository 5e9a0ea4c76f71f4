use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::transport::HttpTransport;

pub const DEFAULT_EMBEDDING_MODEL: &str = "BAAI/bge-large-en-v1.5";
pub const HASH_EMBEDDER_DIMENSION: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("embedder failure: {0}")]
pub struct EmbedError(pub String);

/// Turns texts into fixed-dimension vectors.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
    fn dimension(&self) -> usize;
    fn provider_id(&self) -> &str;

    fn embed_one(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = self.embed(&[text])?;
        v.pop().ok_or_else(|| EmbedError("embedder returned no vector".into()))
    }
}

/// Deterministic bag-of-words projection: each lowercase alphanumeric token is
/// hashed to a signed bucket, then the vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension }
    }

    fn embed_text(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in tokens(text) {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(HASH_EMBEDDER_DIMENSION)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn provider_id(&self) -> &str {
        "hash-bow"
    }
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Remote embedding endpoint: `POST {texts, model}` answered by `{vectors}`.
pub struct HttpEmbedder {
    pub url: String,
    pub model: String,
    pub dimension: usize,
    pub timeout: Duration,
    transport: Arc<dyn HttpTransport>,
}

impl HttpEmbedder {
    pub fn new(url: &str, model: &str, dimension: usize, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            url: url.to_string(),
            model: model.to_string(),
            dimension,
            timeout: Duration::from_secs(30),
            transport,
        }
    }
}

#[derive(Deserialize)]
struct VectorsResponse {
    vectors: Vec<Vec<f64>>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "texts": texts, "model": self.model });
        let raw = self
            .transport
            .post_json(&self.url, &body, self.timeout)
            .map_err(|e| EmbedError(e.to_string()))?;
        let parsed: VectorsResponse =
            serde_json::from_value(raw).map_err(|e| EmbedError(format!("malformed response: {e}")))?;
        if parsed.vectors.len() != texts.len() {
            return Err(EmbedError(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        for v in &parsed.vectors {
            if v.len() != self.dimension {
                return Err(EmbedError(format!("expected dimension {}, got {}", self.dimension, v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError("non-finite component in vector".into()));
            }
        }
        Ok(parsed.vectors)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn provider_id(&self) -> &str {
        &self.model
    }
}

/// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
