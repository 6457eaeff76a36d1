//! Sentence-level text similarity metrics.
//!
//! Conventions are pinned so results are reproducible across runs:
//!
//! * BLEU: sacrebleu-compatible sentence BLEU (13a tokens, case-sensitive,
//!   exponential smoothing, effective order), 0–100.
//! * ROUGE-L: LCS F-measure over lowercased 13a tokens.
//! * METEOR: exact + stem stages only, reported as `meteor-es`.
//! * BERT-F1: greedy cosine matching, no IDF, no rescaling.
//!
//! All string inputs are NFC-normalized before tokenization.

mod bertscore;
mod bleu;
mod meteor;
mod rouge;
mod tokenize;

use std::fmt;
use std::str::FromStr;

pub use bertscore::{
    bert_f1, bert_score, bert_score_from_vectors, BertScore, ContextualTokens, IsolatedTokens, TokenEmbedder,
};
pub use bleu::bleu_sentence;
pub use meteor::{meteor, meteor_detail, MeteorDetail};
pub use rouge::rouge_l;
pub use tokenize::tokenize_13a;

use crate::embedder::EmbedError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Bleu,
    RougeL,
    Meteor,
    BertF1,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 0–100
    Percent,
    /// 0–1 (−1–1 for cosine)
    Unit,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::RougeL => "rouge_l",
            Metric::Meteor => "meteor-es",
            Metric::BertF1 => "bert_f1",
            Metric::Cosine => "cosine",
        }
    }

    pub fn scale(self) -> Scale {
        match self {
            Metric::Bleu => Scale::Percent,
            _ => Scale::Unit,
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            Metric::Bleu => (0.0, 100.0),
            Metric::Cosine => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bleu" => Ok(Metric::Bleu),
            "rouge" | "rouge_l" | "rouge-l" => Ok(Metric::RougeL),
            "meteor" | "meteor-es" => Ok(Metric::Meteor),
            "bertf1" | "bert_f1" | "bert-f1" => Ok(Metric::BertF1),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricScore {
    pub metric: Metric,
    pub value: f64,
}

impl MetricScore {
    pub fn scale(&self) -> Scale {
        self.metric.scale()
    }

    /// Value on the 0–100 scale (BLEU unchanged, unit metrics ×100).
    pub fn as_percent(&self) -> f64 {
        match self.metric.scale() {
            Scale::Percent => self.value,
            Scale::Unit => self.value * 100.0,
        }
    }
}

/// Scores a candidate against a reference with any string metric. `tokens`
/// is only consulted for BERT-F1.
pub fn score_pair(
    metric: Metric,
    candidate: &str,
    reference: &str,
    tokens: Option<&dyn TokenEmbedder>,
) -> Result<MetricScore, EmbedError> {
    let value = match metric {
        Metric::Bleu => bleu_sentence(candidate, reference),
        Metric::RougeL => rouge_l(candidate, reference),
        Metric::Meteor => meteor(candidate, reference),
        Metric::BertF1 => {
            let tokens = tokens.ok_or_else(|| EmbedError::Format("BERT-F1 needs a token embedder".into()))?;
            bert_f1(candidate, reference, tokens)?
        }
        Metric::Cosine => return Err(EmbedError::Format("cosine is scored on embeddings, not strings".into())),
    };
    Ok(MetricScore { metric, value })
}
