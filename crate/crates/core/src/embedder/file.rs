//! Precomputed embeddings stored as JSON lines.
//!
//! ```text
//! # optional metadata comment lines
//! {"dim":256,"provider":"some-model"}
//! {"key":"<sha256 hex>","v":[0.125,-0.5,...]}
//! ```
//!
//! Values are 32-bit floats. Text vectors are keyed by the SHA-256 of the
//! UTF-8 text; token-span vectors by the SHA-256 of `"{start}:{end}\t{context}"`
//! (character offsets). Rows are written sorted by key.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, Result, Subject, TokenSpanRequest};

pub fn text_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn span_key(request: &TokenSpanRequest) -> String {
    text_key(&format!("{}:{}\t{}", request.start(), request.end(), request.context()))
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    provider: String,
}

#[derive(Serialize, Deserialize)]
struct Row {
    key: String,
    v: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileEmbeddings {
    dim: usize,
    provider: String,
    vectors: BTreeMap<String, Vec<f32>>,
}

impl FileEmbeddings {
    pub fn new(dim: usize, provider: impl Into<String>) -> Self {
        Self { dim, provider: provider.into(), vectors: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert_key(&mut self, key: String, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(EmbedError::DimensionMismatch { expected: self.dim, actual: values.len() });
        }
        self.vectors.insert(key, values.iter().map(|&x| x as f32).collect());
        Ok(())
    }

    pub fn insert_text(&mut self, text: &str, values: &[f64]) -> Result<()> {
        self.insert_key(text_key(text), values)
    }

    pub fn insert_span(&mut self, request: &TokenSpanRequest, values: &[f64]) -> Result<()> {
        self.insert_key(span_key(request), values)
    }

    pub fn get(&self, key: &str) -> Result<Vec<f64>> {
        self.vectors
            .get(key)
            .map(|v| v.iter().map(|&x| f64::from(x)).collect())
            .ok_or_else(|| EmbedError::MissingKey { key: key.to_string() })
    }

    /// Writes the header line followed by one row per vector. `preamble`
    /// lines are emitted first, each prefixed with `# `.
    pub fn save(&self, path: impl AsRef<Path>, preamble: &[String]) -> std::io::Result<()> {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let header = Header { dim: self.dim, provider: self.provider.clone() };
        out.push_str(&serde_json::to_string(&header)?);
        out.push('\n');
        for (key, v) in &self.vectors {
            out.push_str(&serde_json::to_string(&Row { key: key.clone(), v: v.clone() })?);
            out.push('\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        f.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| EmbedError::Format(format!("{}: {e}", path.display())))?;
        let mut header: Option<Header> = None;
        let mut vectors = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| EmbedError::Format(format!("{}: {e}", path.display())))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |e: serde_json::Error| EmbedError::Format(format!("{}:{}: {e}", path.display(), i + 1));
            match &header {
                None => header = Some(serde_json::from_str(trimmed).map_err(bad)?),
                Some(h) => {
                    let row: Row = serde_json::from_str(trimmed).map_err(bad)?;
                    if row.v.len() != h.dim {
                        return Err(EmbedError::DimensionMismatch { expected: h.dim, actual: row.v.len() });
                    }
                    if row.v.iter().any(|x| !x.is_finite()) {
                        return Err(EmbedError::NonFinite { provider: h.provider.clone() });
                    }
                    vectors.insert(row.key, row.v);
                }
            }
        }
        let header = header.ok_or_else(|| EmbedError::Format(format!("{}: missing header line", path.display())))?;
        Ok(Self { dim: header.dim, provider: header.provider, vectors })
    }

    fn wrap(&self, values: Vec<f64>, subject: Subject) -> EmbeddingVector {
        EmbeddingVector { values, provider_id: self.provider.clone(), subject }
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn provider_id(&self) -> &str {
        &self.provider
    }

    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| Ok(self.wrap(self.get(&text_key(t))?, subject))).collect()
    }

    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        requests.iter().map(|r| Ok(self.wrap(self.get(&span_key(r))?, Subject::TokenSpan))).collect()
    }
}
