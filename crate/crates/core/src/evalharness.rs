//! Reference-based evaluation of generated definitions, and correlations
//! between usage-example properties and the resulting scores.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::map_batches;
use crate::corpus::char_range_to_bytes;
use crate::embedder::EmbedError;
use crate::textmetrics::{bert_f1, bleu_sentence, meteor, rouge_l, Metric, TokenEmbedder};
use crate::usage_graph::{spearman, GraphError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    MalformedLine { path: PathBuf, line: usize, reason: String },
    #[error("instance {id}: {reason}")]
    InvalidInstance { id: String, reason: String },
    #[error("no instances to evaluate")]
    Empty,
    #[error("instance {id}: {source}")]
    Embed {
        id: String,
        #[source]
        source: EmbedError,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub id: String,
    pub lemma: String,
    pub context: String,
    /// Character offsets of the target in `context`.
    pub start: usize,
    pub end: usize,
    pub gold: String,
    pub generated: String,
}

impl EvalInstance {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| EvalError::InvalidInstance { id: self.id.clone(), reason: reason.to_string() };
        if self.gold.trim().is_empty() {
            return Err(invalid("empty gold definition"));
        }
        if self.generated.trim().is_empty() {
            return Err(invalid("empty generated definition"));
        }
        if self.start > self.end || char_range_to_bytes(&self.context, (self.start, self.end)).is_none() {
            return Err(invalid("target span outside the context"));
        }
        Ok(())
    }

    fn words(&self) -> usize {
        self.context.split_whitespace().count()
    }

    /// Whitespace tokens before the target (its 0-based token index).
    fn target_position(&self) -> usize {
        let (start, _) = char_range_to_bytes(&self.context, (self.start, self.end)).unwrap_or((0, 0));
        self.context[..start].split_whitespace().count()
    }
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<EvalInstance>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let inst: EvalInstance = serde_json::from_str(t).map_err(|e| EvalError::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        inst.validate()?;
        out.push(inst);
    }
    Ok(out)
}

/// Scores of one instance; BLEU on 0–100, the rest on 0–1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScores {
    pub id: String,
    pub bleu: f64,
    pub rouge_l: f64,
    pub bert_f1: f64,
    pub meteor: f64,
}

impl InstanceScores {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Bleu => self.bleu,
            Metric::RougeL => self.rouge_l,
            Metric::BertF1 => self.bert_f1,
            Metric::Meteor => self.meteor,
            Metric::Cosine => f64::NAN,
        }
    }
}

pub const EVAL_METRICS: [Metric; 4] = [Metric::Bleu, Metric::RougeL, Metric::BertF1, Metric::Meteor];

pub fn score_instance(instance: &EvalInstance, tokens: &dyn TokenEmbedder) -> Result<InstanceScores> {
    let (c, r) = (instance.generated.as_str(), instance.gold.as_str());
    Ok(InstanceScores {
        id: instance.id.clone(),
        bleu: bleu_sentence(c, r),
        rouge_l: rouge_l(c, r),
        bert_f1: bert_f1(c, r, tokens).map_err(|source| EvalError::Embed { id: instance.id.clone(), source })?,
        meteor: meteor(c, r),
    })
}

/// Per-instance scores in input order, computed on up to `jobs` threads.
pub fn score_instances(
    instances: &[EvalInstance],
    tokens: &dyn TokenEmbedder,
    jobs: usize,
) -> Result<Vec<InstanceScores>> {
    let chunk = instances.len().div_ceil(jobs.max(1)).max(1);
    let batches = map_batches(instances.len(), chunk, jobs.max(1), |range| {
        instances[range].iter().map(|i| score_instance(i, tokens)).collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(instances.len());
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

/// Mean sentence-level scores. Raw means keep each metric's own scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub dataset: String,
    pub n: usize,
    pub bleu: f64,
    pub rouge_l: f64,
    pub bert_f1: f64,
    pub meteor: f64,
}

impl EvalSummary {
    /// All four means on 0–100.
    pub fn percent(&self) -> [f64; 4] {
        [self.bleu, self.rouge_l * 100.0, self.bert_f1 * 100.0, self.meteor * 100.0]
    }
}

// Summing sorted values makes the mean independent of instance order.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn summarize(dataset: &str, scores: &[InstanceScores]) -> Result<EvalSummary> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let mean = |m: Metric| order_free_mean(scores.iter().map(|s| s.get(m)).collect());
    Ok(EvalSummary {
        dataset: dataset.to_string(),
        n: scores.len(),
        bleu: mean(Metric::Bleu),
        rouge_l: mean(Metric::RougeL),
        bert_f1: mean(Metric::BertF1),
        meteor: mean(Metric::Meteor),
    })
}

pub fn evaluate(
    dataset: &str,
    instances: &[EvalInstance],
    tokens: &dyn TokenEmbedder,
    jobs: usize,
) -> Result<(EvalSummary, Vec<InstanceScores>)> {
    if instances.is_empty() {
        return Err(EvalError::Empty);
    }
    for i in instances {
        i.validate()?;
    }
    let scores = score_instances(instances, tokens, jobs)?;
    Ok((summarize(dataset, &scores)?, scores))
}

pub const SUMMARY_HEADER: &str = "dataset\tn\tbleu\trouge_l\tbert_f1\tmeteor\trouge_l_raw\tbert_f1_raw\tmeteor_raw";

/// Summary TSV: 0–100 columns followed by the raw 0–1 means.
pub fn summary_tsv(summaries: &[EvalSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let p = s.percent();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            s.dataset, s.n, p[0], p[1], p[2], p[3], s.rouge_l, s.bert_f1, s.meteor
        ));
    }
    out
}

pub fn scores_tsv(scores: &[InstanceScores]) -> String {
    let mut out = String::from("id\tbleu\trouge_l\tbert_f1\tmeteor\n");
    for s in scores {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", s.id, s.bleu, s.rouge_l, s.bert_f1, s.meteor));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleProperty {
    ContextLength,
    TargetPosition,
    RelativePosition,
}

impl ExampleProperty {
    pub const ALL: [ExampleProperty; 3] =
        [ExampleProperty::ContextLength, ExampleProperty::TargetPosition, ExampleProperty::RelativePosition];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleProperty::ContextLength => "context_length",
            ExampleProperty::TargetPosition => "target_position",
            ExampleProperty::RelativePosition => "relative_position",
        }
    }

    /// Context length and target index count whitespace tokens.
    pub fn value(self, instance: &EvalInstance) -> f64 {
        match self {
            ExampleProperty::ContextLength => instance.words() as f64,
            ExampleProperty::TargetPosition => instance.target_position() as f64,
            ExampleProperty::RelativePosition => {
                let n = instance.words();
                if n == 0 {
                    0.0
                } else {
                    instance.target_position() as f64 / n as f64
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCorrelation {
    pub property: ExampleProperty,
    pub metric: Metric,
    pub rho: std::result::Result<f64, GraphError>,
}

/// Spearman rho between every example property and every metric, with the
/// same tie handling as graph correlations. Undefined cells are errors.
pub fn example_property_correlations(
    instances: &[EvalInstance],
    scores: &[InstanceScores],
) -> Vec<PropertyCorrelation> {
    let mut out = Vec::new();
    for property in ExampleProperty::ALL {
        let xs: Vec<f64> = instances.iter().map(|i| property.value(i)).collect();
        for metric in EVAL_METRICS {
            let ys: Vec<f64> = scores.iter().map(|s| s.get(metric)).collect();
            out.push(PropertyCorrelation { property, metric, rho: spearman(&xs, &ys) });
        }
    }
    out
}

pub fn correlations_tsv(rows: &[PropertyCorrelation]) -> String {
    let mut out = String::from("property\tmetric\trho\tnote\n");
    for r in rows {
        let (rho, note) = match &r.rho {
            Ok(v) => (v.to_string(), String::new()),
            Err(e) => ("NA".to_string(), e.to_string()),
        };
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.property.as_str(), r.metric, rho, note));
    }
    out
}
