use std::collections::HashMap;
use std::sync::RwLock;

use super::file::{span_key, text_key};
use super::{EmbeddingProvider, EmbeddingVector, Result, Subject, TokenSpanRequest};

type Key = (String, Subject, String);

/// Memoizes a provider by `(provider_id, subject, sha256(text))`.
///
/// Racing inserts of the same key store the same vector, so concurrent use
/// needs no coordination beyond the lock.
pub struct CachedProvider<P> {
    inner: P,
    cache: RwLock<HashMap<Key, Vec<f64>>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup(&self, keys: &[Key]) -> (Vec<Option<Vec<f64>>>, Vec<usize>) {
        let cache = self.cache.read().unwrap();
        let hits: Vec<Option<Vec<f64>>> = keys.iter().map(|k| cache.get(k).cloned()).collect();
        let misses = hits.iter().enumerate().filter(|(_, h)| h.is_none()).map(|(i, _)| i).collect();
        (hits, misses)
    }

    fn fill(
        &self,
        keys: Vec<Key>,
        subject: Subject,
        compute: impl FnOnce(&[usize]) -> Result<Vec<EmbeddingVector>>,
    ) -> Result<Vec<EmbeddingVector>> {
        let (mut hits, misses) = self.lookup(&keys);
        if !misses.is_empty() {
            let fresh = compute(&misses)?;
            let mut cache = self.cache.write().unwrap();
            for (&i, v) in misses.iter().zip(fresh) {
                let stored = cache.entry(keys[i].clone()).or_insert(v.values);
                hits[i] = Some(stored.clone());
            }
        }
        Ok(hits
            .into_iter()
            .map(|v| EmbeddingVector {
                values: v.expect("filled"),
                provider_id: self.inner.provider_id().to_string(),
                subject,
            })
            .collect())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        let id = self.inner.provider_id().to_string();
        let keys = texts.iter().map(|t| (id.clone(), subject, text_key(t))).collect();
        self.fill(keys, subject, |misses| {
            let todo: Vec<&str> = misses.iter().map(|&i| texts[i]).collect();
            self.inner.embed_texts(&todo, subject)
        })
    }

    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        let id = self.inner.provider_id().to_string();
        let keys = requests.iter().map(|r| (id.clone(), Subject::TokenSpan, span_key(r))).collect();
        self.fill(keys, Subject::TokenSpan, |misses| {
            let todo: Vec<TokenSpanRequest> = misses.iter().map(|&i| requests[i].clone()).collect();
            self.inner.embed_spans(&todo)
        })
    }
}
