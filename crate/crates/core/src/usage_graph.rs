//! Word usage graphs weighted by definition (or usage) similarity, and their
//! rank correlation with human relatedness judgements.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldEdge, LemmaData, PairKey, Usage};
use crate::embedder::{cosine_values, EmbedError, EmbeddingProvider, Subject, TokenSpanRequest};
use crate::textmetrics::{bleu_sentence, meteor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("no payload for usage {0:?}")]
    MissingPayload(String),
    #[error("pair {pair}: {source}")]
    Weight {
        pair: String,
        #[source]
        source: EmbedError,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("non-finite weight on pair {0}")]
    NonFinite(String),
    #[error("lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate input{}: {reason}", context.as_deref().map(|c| format!(" for {c}")).unwrap_or_default())]
    DegenerateInput { context: Option<String>, reason: String },
}

impl GraphError {
    fn degenerate(reason: impl Into<String>) -> Self {
        GraphError::DegenerateInput { context: None, reason: reason.into() }
    }

    fn in_context(self, label: &str) -> Self {
        match self {
            GraphError::DegenerateInput { reason, .. } => {
                GraphError::DegenerateInput { context: Some(label.to_string()), reason }
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    CosineDefinition,
    BleuDefinition,
    MeteorDefinition,
    CosineSentence,
    CosineToken,
    Gold,
}

impl WeightSource {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightSource::CosineDefinition => "cosine-definition",
            WeightSource::BleuDefinition => "bleu-definition",
            WeightSource::MeteorDefinition => "meteor-definition",
            WeightSource::CosineSentence => "cosine-sentence",
            WeightSource::CosineToken => "cosine-token",
            WeightSource::Gold => "gold",
        }
    }
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightSource {
    type Err = String;

    /// Accepts the short CLI method names as well as the full source names.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cosine" | "cosine-definition" => Ok(WeightSource::CosineDefinition),
            "bleu" | "bleu-definition" => Ok(WeightSource::BleuDefinition),
            "meteor" | "meteor-definition" => Ok(WeightSource::MeteorDefinition),
            "sentence" | "cosine-sentence" => Ok(WeightSource::CosineSentence),
            "token" | "cosine-token" => Ok(WeightSource::CosineToken),
            "gold" => Ok(WeightSource::Gold),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageGraph {
    pub lemma: String,
    pub nodes: Vec<String>,
    pub edges: BTreeMap<PairKey, f64>,
    pub weight_source: WeightSource,
}

/// Which usage pairs receive an edge.
#[derive(Debug, Clone, Copy)]
pub enum PairSet<'a> {
    /// Only pairs with a gold edge (the default).
    Gold(&'a [GoldEdge]),
    /// Every unordered pair of nodes.
    All,
}

impl PairSet<'_> {
    fn pairs(&self, nodes: &[String]) -> Vec<PairKey> {
        match self {
            PairSet::Gold(gold) => gold.iter().map(|g| g.pair.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
            PairSet::All => {
                let mut out = Vec::new();
                for (i, a) in nodes.iter().enumerate() {
                    for b in &nodes[i + 1..] {
                        out.extend(PairKey::new(a.as_str(), b.as_str()));
                    }
                }
                out.sort();
                out
            }
        }
    }
}

/// One weighted edge per requested pair. Weight functions see the payloads
/// of the pair's first and second id (lexicographic order).
pub fn build_graph<P, F>(
    lemma: &str,
    usages: &[Usage],
    payloads: &HashMap<String, P>,
    pairs: PairSet<'_>,
    weight_source: WeightSource,
    weight: F,
) -> Result<UsageGraph>
where
    F: Fn(&P, &P) -> std::result::Result<f64, EmbedError>,
{
    let mut nodes: Vec<String> = usages.iter().map(|u| u.id.clone()).collect();
    nodes.sort();
    let known: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
    let mut edges = BTreeMap::new();
    for pair in pairs.pairs(&nodes) {
        for id in [pair.first(), pair.second()] {
            if !known.contains(id) || !payloads.contains_key(id) {
                return Err(GraphError::MissingPayload(id.to_string()));
            }
        }
        let w = weight(&payloads[pair.first()], &payloads[pair.second()])
            .map_err(|source| GraphError::Weight { pair: pair.to_string(), source })?;
        if !w.is_finite() {
            return Err(GraphError::NonFinite(pair.to_string()));
        }
        edges.insert(pair, w);
    }
    Ok(UsageGraph { lemma: lemma.to_string(), nodes, edges, weight_source })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho with average ranks for ties. Constant inputs are an error,
/// not zero.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(GraphError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(GraphError::degenerate(format!("{} paired values, need at least 2", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(GraphError::degenerate("non-finite value"));
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(GraphError::degenerate("constant list, correlation undefined"));
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// Lemma name, or `ALL` for pooled reports.
    pub label: String,
    pub method: WeightSource,
    pub rho: f64,
    pub n_pairs: usize,
}

fn paired_values(graph: &UsageGraph, gold: &[GoldEdge]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for g in gold {
        if let Some(w) = graph.edges.get(&g.pair) {
            xs.push(*w);
            ys.push(g.weight);
        }
    }
    (xs, ys)
}

/// Spearman correlation over the pairs present in both the graph and gold.
pub fn correlate_with_gold(graph: &UsageGraph, gold: &[GoldEdge]) -> Result<CorrelationReport> {
    let (xs, ys) = paired_values(graph, gold);
    let rho = spearman(&xs, &ys).map_err(|e| e.in_context(&graph.lemma))?;
    Ok(CorrelationReport { label: graph.lemma.clone(), method: graph.weight_source, rho, n_pairs: xs.len() })
}

#[derive(Debug, Clone)]
pub struct CorrelationSummary {
    pub method: WeightSource,
    /// Sorted by lemma.
    pub per_lemma: Vec<(String, Result<CorrelationReport>)>,
    /// Mean of the per-lemma rhos that could be computed.
    pub mean_of_lemmas: Option<f64>,
    /// One rho over every lemma's pairs.
    pub pooled: Result<CorrelationReport>,
}

/// Correlates several lemmas at once, reporting both the per-lemma mean and
/// the pooled coefficient.
pub fn correlate_lemmas(method: WeightSource, items: &[(&UsageGraph, &[GoldEdge])]) -> CorrelationSummary {
    let mut sorted: Vec<&(&UsageGraph, &[GoldEdge])> = items.iter().collect();
    sorted.sort_by(|a, b| a.0.lemma.cmp(&b.0.lemma));
    let mut per_lemma = Vec::new();
    let (mut all_x, mut all_y) = (Vec::new(), Vec::new());
    for (graph, gold) in sorted {
        per_lemma.push((graph.lemma.clone(), correlate_with_gold(graph, gold)));
        let (xs, ys) = paired_values(graph, gold);
        all_x.extend(xs);
        all_y.extend(ys);
    }
    let ok: Vec<f64> = per_lemma.iter().filter_map(|(_, r)| r.as_ref().ok().map(|r| r.rho)).collect();
    let mean_of_lemmas = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
    let pooled = spearman(&all_x, &all_y).map_err(|e| e.in_context("ALL")).map(|rho| CorrelationReport {
        label: "ALL".into(),
        method,
        rho,
        n_pairs: all_x.len(),
    });
    CorrelationSummary { method, per_lemma, mean_of_lemmas, pooled }
}

#[derive(Serialize)]
struct JsonEdge<'a> {
    u: &'a str,
    v: &'a str,
    w: f64,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    lemma: &'a str,
    nodes: &'a [String],
    edges: Vec<JsonEdge<'a>>,
    weight_source: WeightSource,
}

impl UsageGraph {
    /// Keeps only edges whose pair is in `gold`.
    pub fn restricted_to(&self, gold: &[GoldEdge]) -> UsageGraph {
        let keep: BTreeSet<&PairKey> = gold.iter().map(|g| &g.pair).collect();
        UsageGraph {
            edges: self.edges.iter().filter(|(k, _)| keep.contains(k)).map(|(k, v)| (k.clone(), *v)).collect(),
            ..self.clone()
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let g = JsonGraph {
            lemma: &self.lemma,
            nodes: &self.nodes,
            edges: self.edges.iter().map(|(k, w)| JsonEdge { u: k.first(), v: k.second(), w: *w }).collect(),
            weight_source: self.weight_source,
        };
        serde_json::to_value(g).expect("graph serializes")
    }

    /// Undirected DOT with the weight as edge label.
    pub fn to_dot(&self) -> String {
        let mut out = format!("graph {} {{\n", dot_id(&self.lemma));
        out.push_str(&format!("  label={};\n", dot_id(&format!("{} ({})", self.lemma, self.weight_source))));
        for n in &self.nodes {
            out.push_str(&format!("  {};\n", dot_id(n)));
        }
        for (k, w) in &self.edges {
            out.push_str(&format!(
                "  {} -- {} [label=\"{:.4}\", weight={:.6}];\n",
                dot_id(k.first()),
                dot_id(k.second()),
                w,
                w
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn dot_id(s: &str) -> String {
    let escaped = s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
    format!("\"{escaped}\"")
}

/// Builds the graph for one lemma with one of the standard weightings.
///
/// `definitions` maps usage id to definition text; it is not consulted for
/// the sentence and token methods.
pub fn build_method_graph<P: EmbeddingProvider + ?Sized>(
    lemma: &LemmaData,
    definitions: &HashMap<String, String>,
    provider: &P,
    method: WeightSource,
    pairs: PairSet<'_>,
) -> Result<UsageGraph> {
    let ids: Vec<String> = {
        let nodes: Vec<String> = lemma.usages.iter().map(|u| u.id.clone()).collect();
        let set: BTreeSet<String> =
            pairs.pairs(&nodes).into_iter().flat_map(|p| [p.first().to_string(), p.second().to_string()]).collect();
        set.into_iter().collect()
    };
    let index = lemma.usage_index();
    let text_of = |id: &str| -> Result<&str> {
        definitions.get(id).map(String::as_str).ok_or_else(|| GraphError::MissingPayload(id.to_string()))
    };
    match method {
        WeightSource::CosineDefinition | WeightSource::CosineSentence | WeightSource::CosineToken => {
            let vectors = match method {
                WeightSource::CosineDefinition => {
                    let texts = ids.iter().map(|id| text_of(id)).collect::<Result<Vec<_>>>()?;
                    provider.embed_texts(&texts, Subject::Definition)?
                }
                WeightSource::CosineSentence => {
                    let texts = ids
                        .iter()
                        .map(|id| {
                            index
                                .get(id.as_str())
                                .map(|u| u.context.as_str())
                                .ok_or_else(|| GraphError::MissingPayload(id.clone()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    provider.embed_texts(&texts, Subject::Sentence)?
                }
                _ => {
                    let reqs = ids
                        .iter()
                        .map(|id| {
                            let u = index.get(id.as_str()).ok_or_else(|| GraphError::MissingPayload(id.clone()))?;
                            Ok(TokenSpanRequest::new(u.context.clone(), u.target_span.0, u.target_span.1)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    provider.embed_spans(&reqs)?
                }
            };
            let payloads: HashMap<String, Vec<f64>> =
                ids.into_iter().zip(vectors.into_iter().map(|v| v.values)).collect();
            build_graph(&lemma.lemma, &lemma.usages, &payloads, pairs, method, |a, b| cosine_values(a, b))
        }
        WeightSource::BleuDefinition | WeightSource::MeteorDefinition => {
            let payloads: HashMap<String, String> =
                ids.iter().map(|id| Ok((id.clone(), text_of(id)?.to_string()))).collect::<Result<_>>()?;
            let metric: fn(&str, &str) -> f64 =
                if method == WeightSource::BleuDefinition { bleu_sentence } else { meteor };
            build_graph(&lemma.lemma, &lemma.usages, &payloads, pairs, method, |a, b| {
                Ok((metric(a, b) + metric(b, a)) / 2.0)
            })
        }
        WeightSource::Gold => {
            let gold: HashMap<&PairKey, f64> = lemma.gold.iter().map(|g| (&g.pair, g.weight)).collect();
            let mut graph = build_graph(
                &lemma.lemma,
                &lemma.usages,
                &HashMap::<String, ()>::new(),
                PairSet::Gold(&[]),
                method,
                |_, _| Ok(0.0),
            )?;
            for pair in pairs.pairs(&graph.nodes) {
                if let Some(w) = gold.get(&pair) {
                    graph.edges.insert(pair, *w);
                }
            }
            Ok(graph)
        }
    }
}
