use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{validate_batch, EmbedError, EmbeddingProvider, EmbeddingVector, Result, Subject, TokenSpanRequest};
use crate::batch::map_batches;
use crate::http::{JsonClient, RetryPolicy};

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub url: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl RemoteEmbedderConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            batch_size: 64,
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    subject: &'static str,
    texts: &'a [&'a str],
}

#[derive(Serialize)]
struct SpanItem<'a> {
    context: &'a str,
    start: usize,
    end: usize,
}

#[derive(Serialize)]
struct SpansRequest<'a> {
    subject: &'static str,
    items: Vec<SpanItem<'a>>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for `POST /v1/embed`.
///
/// Labels go over the wire with subject `definition`: a label is a definition.
pub struct RemoteEmbedder {
    client: JsonClient,
    config: RemoteEmbedderConfig,
    id: String,
    // First dimension seen; later responses must agree.
    dim: Mutex<Option<usize>>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let client = JsonClient::new(&config.url, config.timeout, config.retry.clone());
        let id = format!("remote:{}", client.base_url());
        Self { client, config, id, dim: Mutex::new(None) }
    }

    fn call<Req: Serialize>(&self, body: &Req, expected: usize) -> Result<Vec<Vec<f64>>> {
        let resp: EmbedResponse = self.client.post("/v1/embed", body)?;
        if resp.vectors.len() != expected {
            return Err(EmbedError::CountMismatch { expected, actual: resp.vectors.len() });
        }
        let known = {
            let mut dim = self.dim.lock().unwrap();
            *dim.get_or_insert(resp.dim)
        };
        if known != resp.dim {
            return Err(EmbedError::DimensionMismatch { expected: known, actual: resp.dim });
        }
        validate_batch(&resp.vectors, Some(resp.dim), &self.id)?;
        Ok(resp.vectors)
    }

    fn batched(
        &self,
        n: usize,
        subject: Subject,
        f: impl Fn(std::ops::Range<usize>) -> Result<Vec<Vec<f64>>> + Sync,
    ) -> Result<Vec<EmbeddingVector>> {
        let batches = map_batches(n, self.config.batch_size, self.config.max_in_flight, f);
        let mut out = Vec::with_capacity(n);
        for batch in batches {
            out.extend(batch?.into_iter().map(|values| EmbeddingVector {
                values,
                provider_id: self.id.clone(),
                subject,
            }));
        }
        Ok(out)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        let wire = match subject {
            Subject::Label => Subject::Definition,
            s => s,
        };
        self.batched(texts.len(), subject, |range| {
            let len = range.len();
            self.call(&TextsRequest { subject: wire.as_str(), texts: &texts[range] }, len)
        })
    }

    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        self.batched(requests.len(), Subject::TokenSpan, |range| {
            let items: Vec<SpanItem> = requests[range]
                .iter()
                .map(|r| SpanItem { context: r.context(), start: r.start(), end: r.end() })
                .collect();
            let len = items.len();
            self.call(&SpansRequest { subject: Subject::TokenSpan.as_str(), items }, len)
        })
    }
}
