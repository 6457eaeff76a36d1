//! Text and token-span embeddings behind one provider trait.
//!
//! Three providers ship with the crate:
//!
//! * [`FallbackEmbedder`]: deterministic feature hashing, no model needed.
//! * [`FileEmbeddings`]: vectors precomputed elsewhere, looked up by text hash.
//! * [`RemoteEmbedder`]: the `/v1/embed` HTTP protocol.
//!
//! [`CachedProvider`] memoizes any of them.

mod cache;
mod fallback;
mod file;
mod remote;

pub use cache::CachedProvider;
pub use fallback::{FallbackEmbedder, DEFAULT_DIM, DEFAULT_SEED, DEFAULT_WINDOW};
pub use file::{span_key, text_key, FileEmbeddings};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::char_range_to_bytes;
use crate::http::HttpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error(transparent)]
    Transport(#[from] HttpError),
    #[error("no stored vector for key {key}")]
    MissingKey { key: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("non-finite value in vector from {provider}")]
    NonFinite { provider: String },
    #[error("span {start}:{end} invalid for context of {len} chars")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("provider returned {actual} vectors for {expected} inputs")]
    CountMismatch { expected: usize, actual: usize },
    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

/// What a vector represents; remote providers route on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subject {
    Definition,
    Sentence,
    TokenSpan,
    Label,
}

impl Subject {
    pub fn as_str(self) -> &'static str {
        match self {
            Subject::Definition => "definition",
            Subject::Sentence => "sentence",
            Subject::TokenSpan => "token-span",
            Subject::Label => "label",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
    pub subject: Subject,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

/// A target span inside a context, in character offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpanRequest {
    context: String,
    start: usize,
    end: usize,
}

impl TokenSpanRequest {
    pub fn new(context: impl Into<String>, start: usize, end: usize) -> Result<Self> {
        let context = context.into();
        if char_range_to_bytes(&context, (start, end)).is_none() {
            return Err(EmbedError::InvalidSpan { start, end, len: context.chars().count() });
        }
        Ok(Self { context, start, end })
    }

    pub fn context(&self) -> &str {
        &self.context
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// Context characters `[start - window, end + window)`, clipped to the context.
    pub fn windowed_text(&self, window: usize) -> &str {
        let len = self.context.chars().count();
        let s = self.start.saturating_sub(window);
        let e = (self.end + window).min(len);
        let (bs, be) = char_range_to_bytes(&self.context, (s, e)).expect("validated span");
        &self.context[bs..be]
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    /// One vector per text, in order. Identical texts must give identical vectors.
    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>>;

    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_texts(texts, subject)
    }
    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_spans(requests)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }
    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_texts(texts, subject)
    }
    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_spans(requests)
    }
}

pub fn embed_texts<P: EmbeddingProvider + ?Sized>(
    texts: &[&str],
    provider: &P,
    subject: Subject,
) -> Result<Vec<EmbeddingVector>> {
    provider.embed_texts(texts, subject)
}

pub fn embed_token_span<P: EmbeddingProvider + ?Sized>(
    request: &TokenSpanRequest,
    provider: &P,
) -> Result<EmbeddingVector> {
    let mut out = provider.embed_spans(std::slice::from_ref(request))?;
    out.pop().ok_or(EmbedError::CountMismatch { expected: 1, actual: 0 })
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of two raw vectors, clamped to `[-1, 1]`.
pub fn cosine_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine_values(&a.values, &b.values)
}

/// Checks that every vector is finite and shares one dimension.
pub(crate) fn validate_batch(vectors: &[Vec<f64>], expected_dim: Option<usize>, provider: &str) -> Result<()> {
    let mut dim = expected_dim;
    for v in vectors {
        match dim {
            Some(d) if d != v.len() => return Err(EmbedError::DimensionMismatch { expected: d, actual: v.len() }),
            None => dim = Some(v.len()),
            _ => {}
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite { provider: provider.to_string() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector { values: values.to_vec(), provider_id: "t".into(), subject: Subject::Definition }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        let v = ev(&[0.3, -1.7, 2.2]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        // (1,1)·(1,0) / (sqrt 2 · 1)
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine(&ev(&[1.0, 1.0]), &ev(&[1.0, 0.0])).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7071067811865475).abs() < 1e-16);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine(&ev(&[0.0, 0.0]), &ev(&[1.0, 0.0])), Err(EmbedError::ZeroVector));
        assert!(matches!(cosine(&ev(&[1.0]), &ev(&[1.0, 0.0])), Err(EmbedError::DimensionMismatch { .. })));
    }

    #[test]
    fn span_validation() {
        assert!(TokenSpanRequest::new("abc", 1, 3).is_ok());
        assert!(matches!(TokenSpanRequest::new("abc", 2, 4), Err(EmbedError::InvalidSpan { .. })));
        assert!(TokenSpanRequest::new("abc", 2, 2).is_err());
        let r = TokenSpanRequest::new("the old record player", 8, 14).unwrap();
        assert_eq!(r.windowed_text(0), "record");
        assert_eq!(r.windowed_text(4), "old record pla");
        assert_eq!(r.windowed_text(100), "the old record player");
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_free(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(norm(&a) > 1e-6 && norm(&b) > 1e-6);
            let ab = cosine_values(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine_values(&b, &a).unwrap());
            let scaled: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            prop_assert!((cosine_values(&scaled, &b).unwrap() - ab).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
