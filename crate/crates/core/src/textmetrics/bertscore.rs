use super::tokenize::tokenize_13a;
use crate::embedder::{cosine_values, EmbedError, EmbeddingProvider, TokenSpanRequest};

/// Produces one vector per token of a sentence.
pub trait TokenEmbedder: Send + Sync {
    fn token_vectors(&self, sentence: &str) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Each 13a token embedded on its own, as a span covering the whole token.
pub struct IsolatedTokens<P>(pub P);

impl<P: EmbeddingProvider> TokenEmbedder for IsolatedTokens<P> {
    fn token_vectors(&self, sentence: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        let requests = tokenize_13a(sentence)
            .into_iter()
            .map(|t| {
                let len = t.chars().count();
                TokenSpanRequest::new(t, 0, len)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.0.embed_spans(&requests)?.into_iter().map(|v| v.values).collect())
    }
}

/// Each 13a token embedded as a span of the original sentence, so contextual
/// providers see the surrounding words. Tokens that do not occur verbatim
/// (entity-decoded ones) fall back to an isolated span.
pub struct ContextualTokens<P>(pub P);

impl<P: EmbeddingProvider> TokenEmbedder for ContextualTokens<P> {
    fn token_vectors(&self, sentence: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut requests = Vec::new();
        let mut cursor = 0usize;
        for tok in tokenize_13a(sentence) {
            let len = tok.chars().count();
            match sentence[cursor..].find(&tok) {
                Some(off) => {
                    let byte_start = cursor + off;
                    let start = sentence[..byte_start].chars().count();
                    requests.push(TokenSpanRequest::new(sentence, start, start + len)?);
                    cursor = byte_start + tok.len();
                }
                None => requests.push(TokenSpanRequest::new(tok, 0, len)?),
            }
        }
        Ok(self.0.embed_spans(&requests)?.into_iter().map(|v| v.values).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn greedy_mean(from: &[Vec<f64>], to: &[Vec<f64>]) -> Result<f64, EmbedError> {
    let mut sum = 0.0;
    for x in from {
        let mut best = f64::NEG_INFINITY;
        for y in to {
            best = best.max(cosine_values(x, y)?);
        }
        sum += best;
    }
    Ok(sum / from.len() as f64)
}

/// Greedy token matching from precomputed token vectors; no IDF weighting,
/// no baseline rescaling. F1 is 0 when either side is empty or when
/// `P + R <= 0`, and never negative.
pub fn bert_score_from_vectors(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<BertScore, EmbedError> {
    if candidate.is_empty() || reference.is_empty() {
        return Ok(BertScore { precision: 0.0, recall: 0.0, f1: 0.0 });
    }
    let recall = greedy_mean(reference, candidate)?;
    let precision = greedy_mean(candidate, reference)?;
    let f1 = if precision + recall <= 0.0 { 0.0 } else { (2.0 * precision * recall / (precision + recall)).max(0.0) };
    Ok(BertScore { precision, recall, f1 })
}

pub fn bert_score<T: TokenEmbedder + ?Sized>(
    candidate: &str,
    reference: &str,
    tokens: &T,
) -> Result<BertScore, EmbedError> {
    let c = tokens.token_vectors(candidate)?;
    let r = tokens.token_vectors(reference)?;
    bert_score_from_vectors(&c, &r)
}

pub fn bert_f1<T: TokenEmbedder + ?Sized>(candidate: &str, reference: &str, tokens: &T) -> Result<f64, EmbedError> {
    Ok(bert_score(candidate, reference, tokens)?.f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::FallbackEmbedder;
    use proptest::prelude::*;

    #[test]
    fn identical_sentences_score_one() {
        let t = IsolatedTokens(FallbackEmbedder::default());
        let f = bert_f1("a promise or vow", "a promise or vow", &t).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let c = ContextualTokens(FallbackEmbedder::default());
        assert!((bert_f1("a promise or vow", "a promise or vow", &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_single_tokens() {
        let s = bert_score_from_vectors(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn toy_two_by_two() {
        let h = 1.0 / 2f64.sqrt();
        let reference = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let candidate = vec![vec![1.0, 0.0], vec![h, h]];
        let s = bert_score_from_vectors(&candidate, &reference).unwrap();
        let expected = (1.0 + h) / 2.0;
        assert!((s.recall - expected).abs() < 1e-12);
        assert!((s.precision - expected).abs() < 1e-12);
        assert!((s.f1 - 0.8535533905932737).abs() < 1e-12);
    }

    #[test]
    fn zero_token_vector_propagates() {
        let err = bert_score_from_vectors(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]]).unwrap_err();
        assert_eq!(err, EmbedError::ZeroVector);
    }

    #[test]
    fn contextual_spans_follow_the_sentence() {
        struct Spans;
        impl EmbeddingProvider for Spans {
            fn provider_id(&self) -> &str {
                "spans"
            }
            fn embed_texts(
                &self,
                _: &[&str],
                _: crate::embedder::Subject,
            ) -> crate::embedder::Result<Vec<crate::embedder::EmbeddingVector>> {
                unreachable!()
            }
            fn embed_spans(
                &self,
                r: &[TokenSpanRequest],
            ) -> crate::embedder::Result<Vec<crate::embedder::EmbeddingVector>> {
                Ok(r.iter()
                    .map(|q| crate::embedder::EmbeddingVector {
                        values: vec![q.start() as f64 + 1.0, q.end() as f64],
                        provider_id: "spans".into(),
                        subject: crate::embedder::Subject::TokenSpan,
                    })
                    .collect())
            }
        }
        let v = ContextualTokens(Spans).token_vectors("Café, au lait.").unwrap();
        // tokens: Café , au lait .  at char offsets 0,4,6,9,13
        let starts: Vec<f64> = v.iter().map(|x| x[0] - 1.0).collect();
        assert_eq!(starts, vec![0.0, 4.0, 6.0, 9.0, 13.0]);
    }

    proptest! {
        #[test]
        fn invariant_under_joint_rotation(
            cand in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..5),
            reference in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 2), 1..5),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            prop_assume!(cand.iter().chain(&reference).all(|v| v[0].hypot(v[1]) > 1e-3));
            let rot = |v: &Vec<f64>| vec![theta.cos() * v[0] - theta.sin() * v[1], theta.sin() * v[0] + theta.cos() * v[1]];
            let a = bert_score_from_vectors(&cand, &reference).unwrap();
            let rc: Vec<_> = cand.iter().map(rot).collect();
            let rr: Vec<_> = reference.iter().map(rot).collect();
            let b = bert_score_from_vectors(&rc, &rr).unwrap();
            prop_assert!((a.f1 - b.f1).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&a.f1));
        }
    }
}
