use unicode_normalization::UnicodeNormalization;

use super::{EmbeddingProvider, EmbeddingVector, Result, Subject, TokenSpanRequest};

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SEED: u64 = 0x5EED_DEF5;
/// Characters of context kept on each side of a token span.
pub const DEFAULT_WINDOW: usize = 16;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Feature-hashing embedder: word unigrams and character trigrams hashed
/// into `dim` signed buckets, then L2-normalized.
///
/// The layout is fixed so other tools can reproduce it exactly:
///
/// 1. NFC-normalize and lowercase the text.
/// 2. Words are maximal runs of alphanumeric characters. If there are none
///    but the trimmed text is non-empty, the trimmed text is the only word.
/// 3. Features are `"w:" + word` per word and `"t:" + trigram` for every
///    3-character window of `" " + words.join(" ") + " "`.
/// 4. `h = fnv1a64(seed.to_le_bytes() ++ feature.utf8)`; bucket `h % dim`
///    receives `+1` if the top bit of `h` is clear, `-1` otherwise.
/// 5. Divide by the L2 norm. A zero vector becomes the unit vector at
///    bucket `fnv1a64(seed.to_le_bytes() ++ "e:") % dim`.
///
/// Token spans embed `window` characters of context on either side of the span.
#[derive(Debug, Clone)]
pub struct FallbackEmbedder {
    dim: usize,
    seed: u64,
    window: usize,
    id: String,
}

impl Default for FallbackEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM, DEFAULT_SEED, DEFAULT_WINDOW)
    }
}

fn fnv1a(seed: u64, feature: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(feature.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn features(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let mut words: Vec<&str> = normalized.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let trimmed = normalized.trim();
    if words.is_empty() && !trimmed.is_empty() {
        words.push(trimmed);
    }
    let mut out: Vec<String> = words.iter().map(|w| format!("w:{w}")).collect();
    if !words.is_empty() {
        let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        out.extend(padded.windows(3).map(|t| {
            let mut f = String::from("t:");
            f.extend(t);
            f
        }));
    }
    out
}

impl FallbackEmbedder {
    pub fn new(dim: usize, seed: u64, window: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed, window, id: format!("fallback-hash-d{dim}-s{seed:x}") }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let dim = self.dim as u64;
        for f in features(text) {
            let h = fnv1a(self.seed, &f);
            v[(h % dim) as usize] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let n = super::norm(&v);
        if n == 0.0 {
            v[(fnv1a(self.seed, "e:") % dim) as usize] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v
    }

    fn wrap(&self, values: Vec<f64>, subject: Subject) -> EmbeddingVector {
        EmbeddingVector { values, provider_id: self.id.clone(), subject }
    }
}

impl EmbeddingProvider for FallbackEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed_texts(&self, texts: &[&str], subject: Subject) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.wrap(self.embed(t), subject)).collect())
    }

    fn embed_spans(&self, requests: &[TokenSpanRequest]) -> Result<Vec<EmbeddingVector>> {
        Ok(requests.iter().map(|r| self.wrap(self.embed(r.windowed_text(self.window)), Subject::TokenSpan)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{cosine, embed_token_span, norm};

    #[test]
    fn deterministic_and_unit_norm() {
        let e = FallbackEmbedder::default();
        let out = e.embed_texts(&["abc", "abc"], Subject::Definition).unwrap();
        assert_eq!(out[0].values, out[1].values);
        assert_eq!(out[0].dim(), 256);
        assert!((out[0].norm() - 1.0).abs() <= 1e-6);
        let again = FallbackEmbedder::new(256, DEFAULT_SEED, DEFAULT_WINDOW).embed("abc");
        assert_eq!(again, out[0].values);
    }

    #[test]
    fn empty_and_punctuation_texts_are_unit_vectors() {
        let e = FallbackEmbedder::default();
        for t in ["", "   ", ",", "?!"] {
            assert!((norm(&e.embed(t)) - 1.0).abs() < 1e-12, "{t:?}");
        }
        assert_ne!(e.embed(","), e.embed("."));
    }

    #[test]
    fn feature_layout() {
        assert_eq!(features("Hi, yo"), vec!["w:hi", "w:yo", "t: hi", "t:hi ", "t:i y", "t: yo", "t:yo "]);
        assert_eq!(features(","), vec!["w:,", "t: , "]);
        assert!(features("").is_empty());
    }

    #[test]
    fn whole_context_span_equals_text_embedding() {
        let e = FallbackEmbedder::default();
        let ctx = "She kept her word and paid the debt.";
        let req = TokenSpanRequest::new(ctx, 0, ctx.chars().count()).unwrap();
        assert_eq!(embed_token_span(&req, &e).unwrap().values, e.embed(ctx));
    }

    #[test]
    fn small_edit_keeps_vectors_close() {
        let e = FallbackEmbedder::default();
        let a = e.embed_texts(&["a long definition of a common household object"], Subject::Definition).unwrap();
        let b = e.embed_texts(&["a long definition of a common household objects"], Subject::Definition).unwrap();
        let c = cosine(&a[0], &b[0]).unwrap();
        assert!(c > 0.5 && c < 1.0, "{c}");
    }
}
