//! Python bindings: text metrics, correlation, space statistics, labelling
//! and the dynamics outlier rule, with the deterministic fallback embedder.

use std::collections::HashMap;
use std::path::PathBuf;

use defsense_core::corpus::{list_lemmas, LemmaData};
use defsense_core::defstore::{index_definitions, load_definitions};
use defsense_core::dynamics::{self, DynamicsConfig};
use defsense_core::embedder::{FallbackEmbedder, DEFAULT_DIM, DEFAULT_SEED, DEFAULT_WINDOW};
use defsense_core::sense_labels::{self, LabelConfig};
use defsense_core::space_stats::{self, KMeansConfig, KSelectConfig};
use defsense_core::textmetrics::{self, IsolatedTokens};
use defsense_core::usage_graph::{self, PairSet, UsageGraph, WeightSource};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn embedder(dim: usize, seed: u64) -> FallbackEmbedder {
    FallbackEmbedder::new(dim, seed, DEFAULT_WINDOW)
}

#[pyfunction]
fn bleu_sentence(candidate: &str, reference: &str) -> f64 {
    textmetrics::bleu_sentence(candidate, reference)
}

#[pyfunction]
fn rouge_l(candidate: &str, reference: &str) -> f64 {
    textmetrics::rouge_l(candidate, reference)
}

#[pyfunction]
fn meteor(candidate: &str, reference: &str) -> f64 {
    textmetrics::meteor(candidate, reference)
}

/// BERT-F1 over fallback token vectors.
#[pyfunction]
#[pyo3(signature = (candidate, reference, dim = DEFAULT_DIM, seed = DEFAULT_SEED))]
fn bert_f1(candidate: &str, reference: &str, dim: usize, seed: u64) -> PyResult<f64> {
    textmetrics::bert_f1(candidate, reference, &IsolatedTokens(embedder(dim, seed))).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (text, dim = DEFAULT_DIM, seed = DEFAULT_SEED))]
fn fallback_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    embedder(dim, seed).embed(text)
}

#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    usage_graph::spearman(&xs, &ys).map_err(value_error)
}

#[pyfunction]
fn silhouette(points: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    space_stats::silhouette(&points, &labels).map_err(value_error)
}

/// Returns (separation B, cohesion W, ratio or None).
#[pyfunction]
fn dispersion(points: Vec<Vec<f64>>, labels: Vec<i64>) -> PyResult<(f64, f64, Option<f64>)> {
    let d = space_stats::dispersion(&points, &labels).map_err(value_error)?;
    Ok((d.separation, d.cohesion, d.ratio))
}

/// Returns (k, assignment, silhouette).
#[pyfunction]
#[pyo3(signature = (points, seed, k_min = 2, k_max = 25, restarts = 10))]
fn select_k(
    points: Vec<Vec<f64>>,
    seed: u64,
    k_min: usize,
    k_max: usize,
    restarts: usize,
) -> PyResult<(usize, Vec<usize>, f64)> {
    let config = KSelectConfig { k_min, k_max, kmeans: KMeansConfig { restarts, ..KMeansConfig::default() }, jobs: 1 };
    let s = space_stats::select_k(&points, seed, &config).map_err(value_error)?;
    Ok((s.k, s.assignment, s.silhouette))
}

/// Index of the member closest to the centroid by cosine.
#[pyfunction]
fn select_prototype(ids: Vec<String>, vectors: Vec<Vec<f64>>) -> PyResult<usize> {
    if ids.is_empty() || ids.len() != vectors.len() {
        return Err(PyValueError::new_err("need one vector per id and at least one member"));
    }
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    sense_labels::select_prototype(&refs, &vectors).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (values, z = dynamics::DEFAULT_Z))]
fn outlier_edges<'py>(py: Python<'py>, values: Vec<f64>, z: f64) -> PyResult<Bound<'py, PyDict>> {
    let s = dynamics::outlier_edges(&values, z);
    let d = PyDict::new(py);
    d.set_item("mean", s.mean)?;
    d.set_item("std", s.std)?;
    d.set_item("threshold", s.threshold)?;
    d.set_item("selected", s.selected)?;
    d.set_item("insufficient_pairs", s.insufficient_pairs)?;
    Ok(d)
}

fn load(corpus: &str, definitions: &str) -> PyResult<(Vec<LemmaData>, HashMap<String, String>)> {
    let root = PathBuf::from(corpus);
    let lemmas = list_lemmas(&root)
        .map_err(value_error)?
        .iter()
        .map(|l| LemmaData::load(&root, l).map_err(value_error))
        .collect::<PyResult<Vec<_>>>()?;
    let defs = index_definitions(&load_definitions(definitions).map_err(value_error)?).map_err(value_error)?;
    Ok((lemmas, defs))
}

/// Spearman rho between a definition-based graph and the gold judgements.
/// Returns {"per_lemma": {lemma: (rho, n_pairs)}, "mean": ..., "pooled": (rho, n_pairs)};
/// lemmas whose rho is undefined map to None.
#[pyfunction]
#[pyo3(signature = (corpus, definitions, method = "cosine"))]
fn correlate<'py>(py: Python<'py>, corpus: &str, definitions: &str, method: &str) -> PyResult<Bound<'py, PyDict>> {
    let method: WeightSource = method.parse().map_err(PyValueError::new_err)?;
    let (lemmas, defs) = load(corpus, definitions)?;
    let e = FallbackEmbedder::default();
    let graphs = lemmas
        .iter()
        .map(|l| usage_graph::build_method_graph(l, &defs, &e, method, PairSet::Gold(&l.gold)).map_err(value_error))
        .collect::<PyResult<Vec<UsageGraph>>>()?;
    let items: Vec<(&UsageGraph, &[_])> = graphs.iter().zip(&lemmas).map(|(g, l)| (g, l.gold.as_slice())).collect();
    let summary = usage_graph::correlate_lemmas(method, &items);
    let per_lemma = PyDict::new(py);
    for (lemma, report) in &summary.per_lemma {
        per_lemma.set_item(lemma, report.as_ref().ok().map(|r| (r.rho, r.n_pairs)))?;
    }
    let d = PyDict::new(py);
    d.set_item("method", method.to_string())?;
    d.set_item("per_lemma", per_lemma)?;
    d.set_item("mean", summary.mean_of_lemmas)?;
    d.set_item("pooled", summary.pooled.as_ref().ok().map(|r| (r.rho, r.n_pairs)))?;
    Ok(d)
}

/// Prototypical-definition labels as (lemma, cluster, usage_id, label) tuples.
#[pyfunction]
#[pyo3(signature = (corpus, definitions, min_cluster_size = 3))]
fn label_clusters(
    corpus: &str,
    definitions: &str,
    min_cluster_size: usize,
) -> PyResult<Vec<(String, i64, String, String)>> {
    let (lemmas, defs) = load(corpus, definitions)?;
    let config = LabelConfig { min_cluster_size, ..LabelConfig::default() };
    let run = sense_labels::label_all(&lemmas, &defs, &FallbackEmbedder::default(), config);
    Ok(run.labels.into_iter().map(|l| (l.lemma, l.cluster, l.source_usage, l.text)).collect())
}

/// Sense dynamics map of one lemma as a JSON string.
#[pyfunction]
#[pyo3(signature = (corpus, definitions, lemma, z = dynamics::DEFAULT_Z))]
fn dynamics_map(corpus: &str, definitions: &str, lemma: &str, z: f64) -> PyResult<String> {
    let (lemmas, defs) = load(corpus, definitions)?;
    let data = lemmas
        .iter()
        .find(|l| l.lemma == lemma)
        .ok_or_else(|| PyValueError::new_err(format!("unknown lemma {lemma:?}")))?;
    let e = FallbackEmbedder::default();
    let labels = sense_labels::label_all(&lemmas, &defs, &e, LabelConfig::default()).labels;
    let config = DynamicsConfig { z, ..DynamicsConfig::default() };
    let map = dynamics::build_map(data, &labels, &e, config).map_err(value_error)?;
    Ok(map.to_json_value().to_string())
}

#[pymodule]
fn defsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(bleu_sentence, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(meteor, m)?)?;
    m.add_function(wrap_pyfunction!(bert_f1, m)?)?;
    m.add_function(wrap_pyfunction!(fallback_embed, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(select_prototype, m)?)?;
    m.add_function(wrap_pyfunction!(outlier_edges, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(label_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(dynamics_map, m)?)?;
    Ok(())
}
