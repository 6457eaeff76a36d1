//! Sense dynamics maps: clusters split by time period, related through the
//! similarity of their sense labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::corpus::{LemmaData, Usage, NOISE_CLUSTER};
use crate::defstore::canonical_label;
use crate::embedder::{cosine_values, EmbedError, EmbeddingProvider, Subject};
use crate::sense_labels::SenseLabel;
use crate::usage_graph::dot_id;

pub const DEFAULT_Z: f64 = 1.0;
pub const DEFAULT_MIN_SUBCLUSTER_SIZE: usize = 3;
pub const OFFSHOOT_HINT: &str = "possible offshoot of a stable sense";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("sub-cluster {cluster}@{period} has no label")]
    MissingLabel { cluster: i64, period: i64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCluster {
    pub lemma: String,
    pub cluster: i64,
    pub period: i64,
    /// Sorted usage ids.
    pub members: Vec<String>,
    pub label: Option<String>,
}

/// One sub-cluster per period with at least `min_size` members; smaller
/// ones are dropped with a warning.
pub fn split_by_period(
    lemma: &str,
    cluster: i64,
    members: &[&Usage],
    min_size: usize,
) -> (Vec<SubCluster>, Vec<String>) {
    let mut by_period: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for u in members {
        by_period.entry(u.grouping).or_default().push(u.id.clone());
    }
    let mut subs = Vec::new();
    let mut warnings = Vec::new();
    for (period, mut ids) in by_period {
        if ids.len() < min_size {
            warnings.push(format!(
                "{lemma}: sub-cluster {cluster}@{period} dropped ({} usage(s), minimum {min_size})",
                ids.len()
            ));
            continue;
        }
        ids.sort();
        subs.push(SubCluster { lemma: lemma.to_string(), cluster, period, members: ids, label: None });
    }
    (subs, warnings)
}

/// Symmetric label-similarity matrix with a same-parent mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Vec<Vec<f64>>,
    pub same_parent: Vec<Vec<bool>>,
}

/// Cosine between label embeddings. The diagonal and pairs with identical
/// label text are exactly 1.
pub fn label_similarity_matrix<P: EmbeddingProvider + ?Sized>(
    subclusters: &[SubCluster],
    embedder: &P,
) -> Result<SimilarityMatrix> {
    let labels = subclusters
        .iter()
        .map(|s| s.label.as_deref().ok_or(DynamicsError::MissingLabel { cluster: s.cluster, period: s.period }))
        .collect::<Result<Vec<_>>>()?;
    let distinct: Vec<&str> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let vectors: BTreeMap<&str, Vec<f64>> = distinct
        .iter()
        .copied()
        .zip(embedder.embed_texts(&distinct, Subject::Label)?.into_iter().map(|v| v.values))
        .collect();
    let n = subclusters.len();
    let mut values = vec![vec![1.0; n]; n];
    let mut same_parent = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = if labels[i] == labels[j] { 1.0 } else { cosine_values(&vectors[labels[i]], &vectors[labels[j]])? };
            values[i][j] = s;
            values[j][i] = s;
            let same = subclusters[i].cluster == subclusters[j].cluster;
            same_parent[i][j] = same;
            same_parent[j][i] = same;
        }
        same_parent[i][i] = true;
    }
    Ok(SimilarityMatrix { values, same_parent })
}

/// Mean and population standard deviation.
pub fn population_stats(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierSelection {
    pub mean: f64,
    pub std: f64,
    /// μ + zσ, absent when fewer than three values were available.
    pub threshold: Option<f64>,
    /// Indices into the input, ascending.
    pub selected: Vec<usize>,
    pub insufficient_pairs: bool,
}

pub const MIN_ELIGIBLE_PAIRS: usize = 3;

/// Values strictly above μ + zσ (population σ). With σ = 0 nothing is
/// selected; with fewer than three values nothing is selected and the
/// result is flagged.
pub fn outlier_edges(values: &[f64], z: f64) -> OutlierSelection {
    let (mean, std) = population_stats(values);
    if values.len() < MIN_ELIGIBLE_PAIRS {
        return OutlierSelection { mean, std, threshold: None, selected: Vec::new(), insufficient_pairs: true };
    }
    select_with_stats(values, z, mean, std)
}

fn select_with_stats(values: &[f64], z: f64, mean: f64, std: f64) -> OutlierSelection {
    let threshold = mean + z * std;
    let selected = if std > 0.0 {
        values.iter().enumerate().filter(|(_, v)| **v > threshold).map(|(i, _)| i).collect()
    } else {
        Vec::new()
    };
    OutlierSelection { mean, std, threshold: Some(threshold), selected, insufficient_pairs: false }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MergeSuggestion {
    pub lemma: String,
    pub a: i64,
    pub b: i64,
    /// Canonical form shared by both labels.
    pub label: String,
}

/// Every unordered pair of clusters of the same lemma whose labels are equal
/// after canonicalization.
pub fn detect_identical_labels(labels: &[SenseLabel]) -> Vec<MergeSuggestion> {
    let mut groups: BTreeMap<(String, String), BTreeSet<i64>> = BTreeMap::new();
    for l in labels {
        groups.entry((l.lemma.clone(), canonical_label(&l.text))).or_default().insert(l.cluster);
    }
    let mut out = Vec::new();
    for ((lemma, label), clusters) in groups {
        let cs: Vec<i64> = clusters.into_iter().collect();
        for i in 0..cs.len() {
            for j in i + 1..cs.len() {
                out.push(MergeSuggestion { lemma: lemma.clone(), a: cs[i], b: cs[j], label: label.clone() });
            }
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEdge {
    /// Node indices, a < b.
    pub a: usize,
    pub b: usize,
    pub similarity: f64,
    /// (similarity − μ) / σ, absent when σ = 0 or statistics are unavailable.
    pub z: Option<f64>,
}

/// Selected sub-cluster edges collapsed onto their parent clusters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relation {
    pub clusters: (i64, i64),
    /// Indices into `candidate_edges`.
    pub edges: Vec<usize>,
    pub max_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hint {
    /// Cluster present in both periods.
    pub stable: i64,
    /// Cluster present only in the later period.
    pub newer: i64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub z: f64,
    pub min_subcluster_size: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self { z: DEFAULT_Z, min_subcluster_size: DEFAULT_MIN_SUBCLUSTER_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsMap {
    pub lemma: String,
    pub nodes: Vec<SubCluster>,
    /// All cross-parent node pairs.
    pub candidate_edges: Vec<CandidateEdge>,
    /// Indices into `candidate_edges`.
    pub selected_edges: Vec<usize>,
    pub z: f64,
    pub mean: f64,
    pub std: f64,
    pub threshold: Option<f64>,
    pub insufficient_pairs: bool,
    /// Whether μ and σ came from outside this lemma.
    pub global_stats: bool,
    pub relations: Vec<Relation>,
    pub merges: Vec<MergeSuggestion>,
    pub hints: Vec<Hint>,
    pub warnings: Vec<String>,
}

/// Builds the map for one lemma from its time-agnostic cluster labels.
/// Clusters without a label are left out with a warning.
pub fn build_map<P: EmbeddingProvider + ?Sized>(
    lemma: &LemmaData,
    labels: &[SenseLabel],
    embedder: &P,
    config: DynamicsConfig,
) -> Result<DynamicsMap> {
    let labels: Vec<&SenseLabel> = labels.iter().filter(|l| l.lemma == lemma.lemma).collect();
    let by_cluster: BTreeMap<i64, &SenseLabel> = labels.iter().map(|l| (l.cluster, *l)).collect();
    let index = lemma.usage_index();
    let mut nodes = Vec::new();
    let mut warnings = Vec::new();
    for (cluster, members) in lemma.cluster_members() {
        if cluster == NOISE_CLUSTER {
            continue;
        }
        let Some(label) = by_cluster.get(&cluster) else {
            warnings.push(format!("{}: cluster {cluster} has no label, left out of the map", lemma.lemma));
            continue;
        };
        let usages: Vec<&Usage> = members.iter().filter_map(|id| index.get(id.as_str()).copied()).collect();
        let (subs, w) = split_by_period(&lemma.lemma, cluster, &usages, config.min_subcluster_size);
        warnings.extend(w);
        nodes.extend(subs.into_iter().map(|mut s| {
            s.label = Some(label.text.clone());
            s
        }));
    }
    let matrix = label_similarity_matrix(&nodes, embedder)?;
    let mut candidate_edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if !matrix.same_parent[i][j] {
                candidate_edges.push(CandidateEdge { a: i, b: j, similarity: matrix.values[i][j], z: None });
            }
        }
    }
    let merges = detect_identical_labels(&labels.iter().map(|l| (*l).clone()).collect::<Vec<_>>());
    let mut map = DynamicsMap {
        lemma: lemma.lemma.clone(),
        nodes,
        candidate_edges,
        selected_edges: Vec::new(),
        z: config.z,
        mean: f64::NAN,
        std: f64::NAN,
        threshold: None,
        insufficient_pairs: false,
        global_stats: false,
        relations: Vec::new(),
        merges,
        hints: Vec::new(),
        warnings,
    };
    map.reselect(config.z, None);
    Ok(map)
}

impl DynamicsMap {
    pub fn similarities(&self) -> Vec<f64> {
        self.candidate_edges.iter().map(|e| e.similarity).collect()
    }

    /// Re-runs edge selection with another z, optionally with externally
    /// supplied (μ, σ), e.g. pooled over all lemmas.
    pub fn reselect(&mut self, z: f64, stats: Option<(f64, f64)>) {
        let sims = self.similarities();
        let sel = match stats {
            Some((mean, std)) => select_with_stats(&sims, z, mean, std),
            None => outlier_edges(&sims, z),
        };
        self.z = z;
        self.mean = sel.mean;
        self.std = sel.std;
        self.threshold = sel.threshold;
        self.insufficient_pairs = sel.insufficient_pairs;
        self.global_stats = stats.is_some();
        self.selected_edges = sel.selected;
        let has_stats = self.threshold.is_some() && self.std > 0.0;
        for e in &mut self.candidate_edges {
            e.z = has_stats.then(|| (e.similarity - sel.mean) / sel.std);
        }
        self.relations = self.collapse();
        self.hints = self.narrate();
    }

    fn collapse(&self) -> Vec<Relation> {
        let mut rel: BTreeMap<(i64, i64), Relation> = BTreeMap::new();
        for &ei in &self.selected_edges {
            let e = &self.candidate_edges[ei];
            let (ca, cb) = (self.nodes[e.a].cluster, self.nodes[e.b].cluster);
            let key = (ca.min(cb), ca.max(cb));
            let r = rel.entry(key).or_insert(Relation {
                clusters: key,
                edges: Vec::new(),
                max_similarity: f64::NEG_INFINITY,
            });
            r.edges.push(ei);
            r.max_similarity = r.max_similarity.max(e.similarity);
        }
        rel.into_values().collect()
    }

    fn periods_of(&self, cluster: i64) -> BTreeSet<i64> {
        self.nodes.iter().filter(|n| n.cluster == cluster).map(|n| n.period).collect()
    }

    /// Offshoot hints, defined for two-period maps only.
    fn narrate(&self) -> Vec<Hint> {
        let periods: BTreeSet<i64> = self.nodes.iter().map(|n| n.period).collect();
        if periods.len() != 2 {
            return Vec::new();
        }
        let later = *periods.last().unwrap();
        let mut hints = Vec::new();
        for r in &self.relations {
            let (a, b) = r.clusters;
            let (pa, pb) = (self.periods_of(a), self.periods_of(b));
            let only_later = |p: &BTreeSet<i64>| p.len() == 1 && p.contains(&later);
            let both = |p: &BTreeSet<i64>| p.len() == 2;
            let pair = if both(&pa) && only_later(&pb) {
                Some((a, b))
            } else if both(&pb) && only_later(&pa) {
                Some((b, a))
            } else {
                None
            };
            if let Some((stable, newer)) = pair {
                hints.push(Hint { stable, newer, text: OFFSHOOT_HINT.to_string() });
            }
        }
        hints
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let node_ref = |i: usize| json!({"cluster": self.nodes[i].cluster, "period": self.nodes[i].period});
        json!({
            "lemma": self.lemma,
            "nodes": self.nodes.iter().map(|n| json!({
                "cluster": n.cluster,
                "period": n.period,
                "size": n.members.len(),
                "label": n.label,
            })).collect::<Vec<_>>(),
            "edges": self.selected_edges.iter().map(|&i| {
                let e = &self.candidate_edges[i];
                json!({"a": node_ref(e.a), "b": node_ref(e.b), "similarity": e.similarity, "z": e.z})
            }).collect::<Vec<_>>(),
            "candidates": self.candidate_edges.iter().map(|e| json!({
                "a": node_ref(e.a), "b": node_ref(e.b), "similarity": e.similarity, "z": e.z
            })).collect::<Vec<_>>(),
            "relations": self.relations.iter().map(|r| json!({
                "a": r.clusters.0, "b": r.clusters.1, "edges": r.edges.len(), "max_similarity": r.max_similarity
            })).collect::<Vec<_>>(),
            "threshold": self.threshold,
            "z": self.z,
            "mean": finite(self.mean),
            "std": finite(self.std),
            "std_kind": "population",
            "stats_scope": if self.global_stats { "global" } else { "lemma" },
            "insufficient_pairs": self.insufficient_pairs,
            "merges": self.merges.iter().map(|m| json!({"a": m.a, "b": m.b, "label": m.label})).collect::<Vec<_>>(),
            "hints": self.hints.iter().map(|h| json!({"stable": h.stable, "newer": h.newer, "hint": h.text})).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }

    fn node_name(&self, i: usize) -> String {
        format!("c{}_p{}", self.nodes[i].cluster, self.nodes[i].period)
    }

    /// Period-grouped DOT; selected edges solid, merge suggestions dashed.
    pub fn to_dot(&self) -> String {
        let mut out = format!("graph {} {{\n  rankdir=LR;\n  node [shape=box];\n", dot_id(&self.lemma));
        let periods: BTreeSet<i64> = self.nodes.iter().map(|n| n.period).collect();
        for p in periods {
            out.push_str(&format!(
                "  subgraph {} {{\n    label={};\n",
                dot_id(&format!("cluster_period_{p}")),
                dot_id(&format!("period {p}"))
            ));
            for (i, n) in self.nodes.iter().enumerate().filter(|(_, n)| n.period == p) {
                let text =
                    format!("sense {} (n={})\n{}", n.cluster, n.members.len(), n.label.as_deref().unwrap_or("?"));
                out.push_str(&format!("    {} [label={}];\n", dot_id(&self.node_name(i)), dot_id(&text)));
            }
            out.push_str("  }\n");
        }
        for &ei in &self.selected_edges {
            let e = &self.candidate_edges[ei];
            out.push_str(&format!(
                "  {} -- {} [label=\"{:.2}\"];\n",
                dot_id(&self.node_name(e.a)),
                dot_id(&self.node_name(e.b)),
                e.similarity
            ));
        }
        for m in &self.merges {
            let first = |c: i64| self.nodes.iter().position(|n| n.cluster == c);
            if let (Some(a), Some(b)) = (first(m.a), first(m.b)) {
                out.push_str(&format!(
                    "  {} -- {} [style=dashed, label=\"same label\"];\n",
                    dot_id(&self.node_name(a)),
                    dot_id(&self.node_name(b))
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
