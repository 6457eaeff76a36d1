//! Sense labels for usage clusters: the most prototypical definition of each
//! cluster, or the definition of its most prototypical usage.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{LemmaData, NOISE_CLUSTER};
use crate::embedder::{cosine_values, EmbedError, EmbeddingProvider, Subject, TokenSpanRequest};

pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("cluster {cluster} has {size} member(s), fewer than {min}")]
    ClusterTooSmall { cluster: i64, size: usize, min: usize },
    #[error("usage {0} has no definition")]
    MissingDefinition(String),
    #[error("usage {0} has no token embedding")]
    MissingEmbedding(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

pub type Result<T> = std::result::Result<T, LabelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMethod {
    ProtoDefinition,
    ProtoUsage,
}

impl LabelMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMethod::ProtoDefinition => "proto-definition",
            LabelMethod::ProtoUsage => "proto-usage",
        }
    }
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "proto-def" | "proto-definition" => Ok(LabelMethod::ProtoDefinition),
            "proto-usage" => Ok(LabelMethod::ProtoUsage),
            other => Err(format!("unknown labelling method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SenseLabel {
    pub lemma: String,
    pub cluster: i64,
    pub text: String,
    pub source_usage: String,
    pub method: LabelMethod,
    pub support: usize,
}

/// Index of the member closest (by cosine) to the mean of `vectors`.
///
/// Members are visited in ascending id order, both when summing the centroid
/// and when comparing, so the result does not depend on input order and
/// exact ties go to the smallest id.
pub fn select_prototype(ids: &[&str], vectors: &[Vec<f64>]) -> std::result::Result<usize, EmbedError> {
    assert_eq!(ids.len(), vectors.len(), "one vector per id");
    assert!(!ids.is_empty(), "empty cluster");
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(ids[b]));
    let dim = vectors[order[0]].len();
    let mut centroid = vec![0.0; dim];
    for &i in &order {
        if vectors[i].len() != dim {
            return Err(EmbedError::DimensionMismatch { expected: dim, actual: vectors[i].len() });
        }
        for (c, x) in centroid.iter_mut().zip(&vectors[i]) {
            *c += x;
        }
    }
    let n = ids.len() as f64;
    centroid.iter_mut().for_each(|c| *c /= n);
    let mut best = order[0];
    let mut best_sim = cosine_values(&vectors[best], &centroid)?;
    for &i in &order[1..] {
        let sim = cosine_values(&vectors[i], &centroid)?;
        if sim > best_sim {
            best = i;
            best_sim = sim;
        }
    }
    Ok(best)
}

fn check_size(cluster: i64, members: &[String], min: usize) -> Result<()> {
    if members.len() < min {
        return Err(LabelError::ClusterTooSmall { cluster, size: members.len(), min });
    }
    Ok(())
}

fn sorted_members(members: &[String]) -> Vec<&str> {
    let mut ids: Vec<&str> = members.iter().map(String::as_str).collect();
    ids.sort();
    ids
}

fn definition_of<'a>(definitions: &'a HashMap<String, String>, id: &str) -> Result<&'a str> {
    definitions.get(id).map(String::as_str).ok_or_else(|| LabelError::MissingDefinition(id.to_string()))
}

/// The member definition whose embedding is closest to the cluster centroid.
pub fn prototypical_definition<P: EmbeddingProvider + ?Sized>(
    lemma: &str,
    cluster: i64,
    members: &[String],
    definitions: &HashMap<String, String>,
    embedder: &P,
    min_cluster_size: usize,
) -> Result<SenseLabel> {
    check_size(cluster, members, min_cluster_size)?;
    let ids = sorted_members(members);
    let texts = ids.iter().map(|id| definition_of(definitions, id)).collect::<Result<Vec<_>>>()?;
    let vectors: Vec<Vec<f64>> =
        embedder.embed_texts(&texts, Subject::Definition)?.into_iter().map(|v| v.values).collect();
    let best = select_prototype(&ids, &vectors)?;
    Ok(SenseLabel {
        lemma: lemma.to_string(),
        cluster,
        text: texts[best].to_string(),
        source_usage: ids[best].to_string(),
        method: LabelMethod::ProtoDefinition,
        support: members.len(),
    })
}

/// The definition of the member whose token embedding is closest to the
/// centroid of the cluster's token embeddings.
pub fn prototypical_usage(
    lemma: &str,
    cluster: i64,
    members: &[String],
    token_vectors: &HashMap<String, Vec<f64>>,
    definitions: &HashMap<String, String>,
    min_cluster_size: usize,
) -> Result<SenseLabel> {
    check_size(cluster, members, min_cluster_size)?;
    let ids = sorted_members(members);
    for id in &ids {
        definition_of(definitions, id)?;
    }
    let vectors = ids
        .iter()
        .map(|id| token_vectors.get(*id).cloned().ok_or_else(|| LabelError::MissingEmbedding(id.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let best = select_prototype(&ids, &vectors)?;
    Ok(SenseLabel {
        lemma: lemma.to_string(),
        cluster,
        text: definitions[ids[best]].clone(),
        source_usage: ids[best].to_string(),
        method: LabelMethod::ProtoUsage,
        support: members.len(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LabelConfig {
    pub method: LabelMethod,
    pub min_cluster_size: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { method: LabelMethod::ProtoDefinition, min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFailure {
    pub lemma: String,
    pub cluster: i64,
    pub error: LabelError,
}

#[derive(Debug, Clone, Default)]
pub struct LabelRun {
    /// Ordered by (lemma, cluster).
    pub labels: Vec<SenseLabel>,
    pub warnings: Vec<String>,
    pub failures: Vec<ClusterFailure>,
}

/// Labels every non-noise cluster of sufficient size. Small clusters produce
/// warnings, other per-cluster errors are collected and the run continues.
pub fn label_lemma<P: EmbeddingProvider + ?Sized>(
    lemma: &LemmaData,
    definitions: &HashMap<String, String>,
    provider: &P,
    config: LabelConfig,
) -> LabelRun {
    let mut run = LabelRun::default();
    let token_vectors = match config.method {
        LabelMethod::ProtoUsage => match token_vectors_for(lemma, provider) {
            Ok(v) => v,
            Err(e) => {
                for (cluster, _) in lemma.cluster_members().into_iter().filter(|(c, _)| *c != NOISE_CLUSTER) {
                    run.failures.push(ClusterFailure { lemma: lemma.lemma.clone(), cluster, error: e.clone() });
                }
                return run;
            }
        },
        LabelMethod::ProtoDefinition => HashMap::new(),
    };
    for (cluster, members) in lemma.cluster_members() {
        if cluster == NOISE_CLUSTER {
            continue;
        }
        let result = match config.method {
            LabelMethod::ProtoDefinition => {
                prototypical_definition(&lemma.lemma, cluster, &members, definitions, provider, config.min_cluster_size)
            }
            LabelMethod::ProtoUsage => prototypical_usage(
                &lemma.lemma,
                cluster,
                &members,
                &token_vectors,
                definitions,
                config.min_cluster_size,
            ),
        };
        match result {
            Ok(label) => run.labels.push(label),
            Err(LabelError::ClusterTooSmall { cluster, size, min }) => run
                .warnings
                .push(format!("{}: cluster {cluster} skipped ({size} usage(s), minimum {min})", lemma.lemma)),
            Err(error) => run.failures.push(ClusterFailure { lemma: lemma.lemma.clone(), cluster, error }),
        }
    }
    run
}

fn token_vectors_for<P: EmbeddingProvider + ?Sized>(
    lemma: &LemmaData,
    provider: &P,
) -> Result<HashMap<String, Vec<f64>>> {
    let mut ids = Vec::new();
    let mut requests = Vec::new();
    for u in &lemma.usages {
        requests.push(TokenSpanRequest::new(u.context.clone(), u.target_span.0, u.target_span.1)?);
        ids.push(u.id.clone());
    }
    let vectors = provider.embed_spans(&requests)?;
    Ok(ids.into_iter().zip(vectors.into_iter().map(|v| v.values)).collect())
}

/// [`label_lemma`] over several lemmas, merged in lemma order.
pub fn label_all<P: EmbeddingProvider + ?Sized>(
    lemmas: &[LemmaData],
    definitions: &HashMap<String, String>,
    provider: &P,
    config: LabelConfig,
) -> LabelRun {
    let mut sorted: Vec<&LemmaData> = lemmas.iter().collect();
    sorted.sort_by(|a, b| a.lemma.cmp(&b.lemma));
    let mut run = LabelRun::default();
    for lemma in sorted {
        let r = label_lemma(lemma, definitions, provider, config);
        run.labels.extend(r.labels);
        run.warnings.extend(r.warnings);
        run.failures.extend(r.failures);
    }
    run
}

#[derive(Debug, Error)]
pub enum LabelFileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Malformed { path: PathBuf, line: usize, reason: String },
}

pub const LABELS_HEADER: &str = "lemma\tcluster\tmethod\tsupport\tsource_usage\ttext";

fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Labels TSV: lemma, cluster, method, support, source_usage, text.
pub fn labels_tsv(labels: &[SenseLabel]) -> String {
    let mut out = String::from(LABELS_HEADER);
    out.push('\n');
    for l in labels {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            clean_field(&l.lemma),
            l.cluster,
            l.method,
            l.support,
            clean_field(&l.source_usage),
            clean_field(&l.text)
        ));
    }
    out
}

pub fn read_labels(path: impl AsRef<Path>) -> std::result::Result<Vec<SenseLabel>, LabelFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LabelFileError::Io { path: path.to_path_buf(), source })?;
    let malformed = |line: usize, reason: String| LabelFileError::Malformed { path: path.to_path_buf(), line, reason };
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != LABELS_HEADER {
                return Err(malformed(i + 1, format!("expected header {LABELS_HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(malformed(i + 1, format!("expected 6 fields, found {}", f.len())));
        }
        out.push(SenseLabel {
            lemma: f[0].to_string(),
            cluster: f[1].parse().map_err(|_| malformed(i + 1, format!("bad cluster {:?}", f[1])))?,
            method: f[2].parse().map_err(|e: String| malformed(i + 1, e))?,
            support: f[3].parse().map_err(|_| malformed(i + 1, format!("bad support {:?}", f[3])))?,
            source_usage: f[4].to_string(),
            text: f[5].to_string(),
        });
    }
    Ok(out)
}

/// Spreadsheet export for comparing two labelling systems: one row per
/// cluster labelled by both, with up to `max_examples` usage contexts.
/// `preamble` lines are written first, each prefixed with `# `.
pub fn write_human_eval(
    path: impl AsRef<Path>,
    lemmas: &[LemmaData],
    system1: &[SenseLabel],
    system2: &[SenseLabel],
    max_examples: usize,
    preamble: &[String],
) -> io::Result<usize> {
    let key = |l: &SenseLabel| (l.lemma.clone(), l.cluster);
    let second: HashMap<(String, i64), &SenseLabel> = system2.iter().map(|l| (key(l), l)).collect();
    let by_lemma: HashMap<&str, &LemmaData> = lemmas.iter().map(|l| (l.lemma.as_str(), l)).collect();
    let mut file = BufWriter::new(fs::File::create(path)?);
    for line in preamble {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(file);
    w.write_record(["Targets", "Examples", "System1", "System2", "Judgements"])?;
    let mut rows = 0;
    let mut first: Vec<&SenseLabel> = system1.iter().collect();
    first.sort_by_key(|l| key(l));
    for a in first {
        let Some(b) = second.get(&key(a)) else { continue };
        let examples = by_lemma
            .get(a.lemma.as_str())
            .and_then(|l| l.cluster_members().remove(&a.cluster).map(|m| (l, m)))
            .map(|(l, members)| {
                members
                    .iter()
                    .take(max_examples)
                    .filter_map(|id| l.usage(id).map(|u| clean_field(&u.context)))
                    .collect::<Vec<_>>()
                    .join(" || ")
            })
            .unwrap_or_default();
        w.write_record([a.lemma.as_str(), &examples, &a.text, &b.text, ""])?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}
