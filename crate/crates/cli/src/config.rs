//! Run configuration: a TOML file, overridden field by field by flags.
//!
//! Paths are taken relative to the working directory. Every key is optional;
//! unknown keys are rejected with their path.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use defsense_core::defstore::{PromptTemplate, DEFAULT_MAX_NEW_TOKENS, DEFAULT_TEMPLATE};
use defsense_core::dynamics::{DynamicsConfig, DEFAULT_MIN_SUBCLUSTER_SIZE, DEFAULT_Z};
use defsense_core::embedder::{DEFAULT_DIM, DEFAULT_SEED, DEFAULT_WINDOW};
use defsense_core::sense_labels::{LabelConfig, LabelMethod, DEFAULT_MIN_CLUSTER_SIZE};
use defsense_core::space_stats::{KMeansConfig, KSelectConfig, Representation};
use defsense_core::textmetrics::Metric;
use defsense_core::usage_graph::WeightSource;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error: {field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: Option<String>,
    pub definitions: Option<String>,
    pub labels: Option<String>,
    /// Restricts a run to these lemmas; empty means all.
    pub lemmas: Vec<String>,
    pub seed: Option<u64>,
    /// Worker threads. Never affects output, so it is left out of the hash.
    #[serde(skip_serializing)]
    pub jobs: usize,
    pub provider: ProviderSection,
    pub generator: GeneratorSection,
    pub graph: GraphSection,
    pub labelling: LabelSection,
    pub space: SpaceSection,
    pub dynamics: DynamicsSection,
    pub eval: EvalSection,
    pub score: ScoreSection,
    pub embed: EmbedSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            definitions: None,
            labels: None,
            lemmas: Vec::new(),
            seed: None,
            jobs: 1,
            provider: ProviderSection::default(),
            generator: GeneratorSection::default(),
            graph: GraphSection::default(),
            labelling: LabelSection::default(),
            space: SpaceSection::default(),
            dynamics: DynamicsSection::default(),
            eval: EvalSection::default(),
            score: ScoreSection::default(),
            embed: EmbedSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    /// `fallback`, `file` or `remote`.
    pub kind: String,
    pub dim: usize,
    pub hash_seed: u64,
    pub window: usize,
    pub path: Option<String>,
    pub url: Option<String>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            kind: "fallback".into(),
            dim: DEFAULT_DIM,
            hash_seed: DEFAULT_SEED,
            window: DEFAULT_WINDOW,
            path: None,
            url: None,
            batch_size: 64,
            max_in_flight: 4,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSection {
    pub url: Option<String>,
    pub from_file: Option<String>,
    pub template: String,
    pub max_new_tokens: usize,
    pub max_context_chars: Option<usize>,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            url: None,
            from_file: None,
            template: DEFAULT_TEMPLATE.into(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            max_context_chars: None,
            batch_size: 16,
            max_in_flight: 4,
            timeout_secs: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub methods: Vec<String>,
    /// `gold` or `all`.
    pub pairs: String,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { methods: vec!["cosine".into()], pairs: "gold".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelSection {
    pub method: String,
    pub min_cluster_size: usize,
    pub max_examples: usize,
}

impl Default for LabelSection {
    fn default() -> Self {
        Self { method: "proto-definition".into(), min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE, max_examples: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceSection {
    pub representations: Vec<String>,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for SpaceSection {
    fn default() -> Self {
        let k = KSelectConfig::default();
        Self {
            representations: vec!["definition".into()],
            k_min: k.k_min,
            k_max: k.k_max,
            restarts: k.kmeans.restarts,
            max_iterations: k.kmeans.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub z: f64,
    pub min_subcluster_size: usize,
    /// Pool μ and σ over every lemma in the run instead of per lemma.
    pub global_stats: bool,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self { z: DEFAULT_Z, min_subcluster_size: DEFAULT_MIN_SUBCLUSTER_SIZE, global_stats: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub instances: Option<String>,
    pub dataset: Option<String>,
    /// `isolated` or `contextual` token vectors for BERT-F1.
    pub tokens: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { instances: None, dataset: None, tokens: "isolated".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreSection {
    pub pairs: Option<String>,
    pub metrics: Vec<String>,
}

impl Default for ScoreSection {
    fn default() -> Self {
        Self { pairs: None, metrics: vec!["bleu".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedSection {
    /// `definitions`, `sentences`, `tokens` or `labels`.
    pub what: String,
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self { what: "definitions".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Fallback,
    File,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedTarget {
    Definitions,
    Sentences,
    Tokens,
    Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenMode {
    Isolated,
    Contextual,
}

fn parse_field<T: FromStr<Err = String>>(field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: String| ConfigError::new(field, e))
}

fn parse_list<T: FromStr<Err = String>>(field: &str, values: &[String]) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(ConfigError::new(field, "must not be empty"));
    }
    let mut out: Vec<T> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        out.push(parse_field(&format!("{field}[{i}]"), v)?);
    }
    Ok(out)
}

fn positive(field: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(ConfigError::new(field, "must be at least 1"));
    }
    Ok(v)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("config", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            ConfigError::new(field, e.inner().message().to_string())
        })
    }

    /// Effective configuration as compact JSON, the hashed and echoed form.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.lemmas.sort();
        c.lemmas.dedup();
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical_json().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn require_corpus(&self) -> Result<&str> {
        self.corpus.as_deref().ok_or_else(|| ConfigError::new("corpus", "required"))
    }

    pub fn require_definitions(&self) -> Result<&str> {
        self.definitions.as_deref().ok_or_else(|| ConfigError::new("definitions", "required"))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| ConfigError::new("seed", "required for clustering runs"))
    }

    pub fn jobs(&self) -> Result<usize> {
        positive("jobs", self.jobs)
    }

    pub fn provider_kind(&self) -> Result<ProviderKind> {
        let p = &self.provider;
        let kind = match p.kind.as_str() {
            "fallback" => ProviderKind::Fallback,
            "file" => ProviderKind::File,
            "remote" => ProviderKind::Remote,
            other => {
                return Err(ConfigError::new(
                    "provider.kind",
                    format!("unknown provider {other:?}, expected fallback, file or remote"),
                ))
            }
        };
        match kind {
            ProviderKind::Fallback => {
                positive("provider.dim", p.dim)?;
            }
            ProviderKind::File if p.path.is_none() => {
                return Err(ConfigError::new("provider.path", "required for the file provider"))
            }
            ProviderKind::Remote if p.url.is_none() => {
                return Err(ConfigError::new("provider.url", "required for the remote provider"))
            }
            ProviderKind::Remote => {
                positive("provider.batch_size", p.batch_size)?;
                positive("provider.max_in_flight", p.max_in_flight)?;
            }
            ProviderKind::File => {}
        }
        Ok(kind)
    }

    pub fn provider_timeout(&self) -> Duration {
        Duration::from_secs(self.provider.timeout_secs)
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        PromptTemplate::named(&self.generator.template)
            .map_err(|e| ConfigError::new("generator.template", e.to_string()))
    }

    pub fn generator_checked(&self) -> Result<&GeneratorSection> {
        let g = &self.generator;
        match (&g.url, &g.from_file) {
            (Some(_), Some(_)) => Err(ConfigError::new("generator.url", "url and from_file are mutually exclusive")),
            (None, None) => Err(ConfigError::new("generator.url", "one of url and from_file is required")),
            _ => {
                positive("generator.max_new_tokens", g.max_new_tokens)?;
                positive("generator.batch_size", g.batch_size)?;
                positive("generator.max_in_flight", g.max_in_flight)?;
                Ok(g)
            }
        }
    }

    pub fn methods(&self) -> Result<Vec<WeightSource>> {
        let mut m: Vec<WeightSource> = parse_list("graph.methods", &self.graph.methods)?;
        m.dedup();
        Ok(m)
    }

    pub fn all_pairs(&self) -> Result<bool> {
        match self.graph.pairs.as_str() {
            "gold" => Ok(false),
            "all" => Ok(true),
            other => Err(ConfigError::new("graph.pairs", format!("expected gold or all, got {other:?}"))),
        }
    }

    pub fn label_config(&self) -> Result<LabelConfig> {
        let method: LabelMethod = parse_field("labelling.method", &self.labelling.method)?;
        let min_cluster_size = positive("labelling.min_cluster_size", self.labelling.min_cluster_size)?;
        Ok(LabelConfig { method, min_cluster_size })
    }

    pub fn representations(&self) -> Result<Vec<Representation>> {
        let mut r: Vec<Representation> = parse_list("space.representations", &self.space.representations)?;
        r.dedup();
        Ok(r)
    }

    pub fn kselect(&self) -> Result<KSelectConfig> {
        let s = &self.space;
        if s.k_min < 2 {
            return Err(ConfigError::new("space.k_min", "must be at least 2"));
        }
        if s.k_max < s.k_min {
            return Err(ConfigError::new("space.k_max", "must not be below space.k_min"));
        }
        Ok(KSelectConfig {
            k_min: s.k_min,
            k_max: s.k_max,
            kmeans: KMeansConfig {
                restarts: positive("space.restarts", s.restarts)?,
                max_iterations: positive("space.max_iterations", s.max_iterations)?,
            },
            jobs: 1,
        })
    }

    pub fn dynamics_config(&self) -> Result<DynamicsConfig> {
        let d = &self.dynamics;
        if !d.z.is_finite() {
            return Err(ConfigError::new("dynamics.z", "must be finite"));
        }
        Ok(DynamicsConfig {
            z: d.z,
            min_subcluster_size: positive("dynamics.min_subcluster_size", d.min_subcluster_size)?,
        })
    }

    pub fn token_mode(&self) -> Result<TokenMode> {
        match self.eval.tokens.as_str() {
            "isolated" => Ok(TokenMode::Isolated),
            "contextual" => Ok(TokenMode::Contextual),
            other => Err(ConfigError::new("eval.tokens", format!("expected isolated or contextual, got {other:?}"))),
        }
    }

    pub fn metrics(&self) -> Result<Vec<Metric>> {
        let metrics: Vec<Metric> = parse_list("score.metrics", &self.score.metrics)?;
        if let Some(i) = metrics.iter().position(|m| *m == Metric::Cosine) {
            return Err(ConfigError::new(format!("score.metrics[{i}]"), "cosine compares embeddings, not text pairs"));
        }
        Ok(metrics)
    }

    pub fn embed_target(&self) -> Result<EmbedTarget> {
        match self.embed.what.as_str() {
            "definitions" => Ok(EmbedTarget::Definitions),
            "sentences" => Ok(EmbedTarget::Sentences),
            "tokens" => Ok(EmbedTarget::Tokens),
            "labels" => Ok(EmbedTarget::Labels),
            other => Err(ConfigError::new(
                "embed.what",
                format!("expected definitions, sentences, tokens or labels, got {other:?}"),
            )),
        }
    }
}
