//! The analyses behind the subcommands, returning data rather than files so
//! that `report` can reuse them.

use std::collections::HashMap;
use std::path::Path;

use defsense_core::corpus::{list_lemmas, LemmaData, NOISE_CLUSTER};
use defsense_core::defstore::{index_definitions, load_definitions};
use defsense_core::dynamics::{build_map, population_stats, DynamicsMap};
use defsense_core::embedder::{EmbeddingProvider, Subject, TokenSpanRequest};
use defsense_core::evalharness::{evaluate, load_instances, EvalInstance, EvalSummary, InstanceScores};
use defsense_core::sense_labels::{label_lemma, read_labels, LabelRun, SenseLabel};
use defsense_core::space_stats::{
    analyze_space, dwug_cluster_dispersion, pca_project, projection_tsv, Representation, SpaceReport,
};
use defsense_core::textmetrics::{ContextualTokens, IsolatedTokens, TokenEmbedder};
use defsense_core::usage_graph::{
    build_method_graph, correlate_lemmas, CorrelationSummary, PairSet, UsageGraph, WeightSource,
};

use crate::config::{ConfigError, RunConfig, TokenMode};
use crate::output::{cell, fmt_opt, input, par_map, warn, Outcome, Result};
use crate::provider::Provider;

/// Loads the configured lemmas (all when none are named), sorted by name.
pub fn load_corpus(config: &RunConfig) -> Result<Vec<LemmaData>> {
    let corpus = config.require_corpus()?;
    let available = list_lemmas(corpus).map_err(|e| ConfigError::new("corpus", e.to_string()))?;
    if available.is_empty() {
        return Err(ConfigError::new("corpus", format!("no lemma directories under {corpus}")).into());
    }
    let mut wanted: Vec<String> = if config.lemmas.is_empty() { available.clone() } else { config.lemmas.clone() };
    wanted.sort();
    wanted.dedup();
    for l in &wanted {
        if !available.contains(l) {
            return Err(ConfigError::new("lemmas", format!("unknown lemma {l:?} in {corpus}")).into());
        }
    }
    let mut out = Vec::new();
    for l in &wanted {
        let data = LemmaData::load(corpus, l).map_err(input)?;
        for w in &data.warnings {
            warn(w);
        }
        out.push(data);
    }
    Ok(out)
}

pub fn load_definition_index(config: &RunConfig) -> Result<HashMap<String, String>> {
    let path = config.require_definitions()?;
    let defs = load_definitions(path).map_err(input)?;
    index_definitions(&defs).map_err(input)
}

/// Definitions when any of `methods` compares them, else an empty index.
pub fn definitions_for_methods(config: &RunConfig, methods: &[WeightSource]) -> Result<HashMap<String, String>> {
    let needed = methods.iter().any(|m| {
        matches!(m, WeightSource::CosineDefinition | WeightSource::BleuDefinition | WeightSource::MeteorDefinition)
    });
    if needed || config.definitions.is_some() {
        load_definition_index(config)
    } else {
        Ok(HashMap::new())
    }
}

pub struct MethodCorrelation {
    pub method: WeightSource,
    pub summary: CorrelationSummary,
    pub graphs: Vec<UsageGraph>,
    /// Lemmas whose graph could not be built.
    pub graph_failures: Vec<(String, String)>,
}

pub fn correlate(
    lemmas: &[LemmaData],
    definitions: &HashMap<String, String>,
    provider: &Provider,
    methods: &[WeightSource],
    all_pairs: bool,
    jobs: usize,
    outcome: &mut Outcome,
) -> Vec<MethodCorrelation> {
    let mut out = Vec::new();
    for &method in methods {
        let built = par_map(jobs, lemmas, |l| {
            let pairs = if all_pairs { PairSet::All } else { PairSet::Gold(&l.gold) };
            build_method_graph(l, definitions, provider, method, pairs)
        });
        let mut graphs = Vec::new();
        let mut graph_failures = Vec::new();
        for (l, g) in lemmas.iter().zip(built) {
            match g {
                Ok(g) => graphs.push((g, l.gold.as_slice())),
                Err(e) => {
                    outcome.fail(format!("correlate {method} {}: {e}", l.lemma));
                    graph_failures.push((l.lemma.clone(), e.to_string()));
                }
            }
        }
        let items: Vec<_> = graphs.iter().map(|(g, gold)| (g, *gold)).collect();
        let summary = correlate_lemmas(method, &items);
        for (lemma, r) in &summary.per_lemma {
            if let Err(e) = r {
                outcome.fail(format!("correlate {method} {lemma}: {e}"));
            }
        }
        if !graphs.is_empty() {
            if let Err(e) = &summary.pooled {
                outcome.fail(format!("correlate {method} pooled: {e}"));
            }
        }
        out.push(MethodCorrelation {
            method,
            summary,
            graphs: graphs.into_iter().map(|(g, _)| g).collect(),
            graph_failures,
        });
    }
    out
}

pub const CORRELATION_HEADER: &str = "lemma\tmethod\trho\tn_pairs\terror";

/// Per-lemma rows, then `MEAN` (mean of per-lemma rho) and `ALL` (pooled).
pub fn correlation_tsv(results: &[MethodCorrelation]) -> String {
    let mut out = format!("{CORRELATION_HEADER}\n");
    for r in results {
        let mut rows: Vec<(String, String)> = Vec::new();
        let mut total_pairs = 0;
        for (lemma, rep) in &r.summary.per_lemma {
            let row = match rep {
                Ok(c) => {
                    total_pairs += c.n_pairs;
                    format!("{}\t{}\t", c.rho, c.n_pairs)
                }
                Err(e) => format!("NA\t0\t{}", cell(&e.to_string())),
            };
            rows.push((lemma.clone(), row));
        }
        for (lemma, e) in &r.graph_failures {
            rows.push((lemma.clone(), format!("NA\t0\t{}", cell(e))));
        }
        rows.sort();
        for (lemma, row) in rows {
            out.push_str(&format!("{lemma}\t{}\t{row}\n", r.method));
        }
        out.push_str(&format!("MEAN\t{}\t{}\t{total_pairs}\t\n", r.method, fmt_opt(r.summary.mean_of_lemmas)));
        match &r.summary.pooled {
            Ok(p) => out.push_str(&format!("ALL\t{}\t{}\t{}\t\n", r.method, p.rho, p.n_pairs)),
            Err(e) => out.push_str(&format!("ALL\t{}\tNA\t0\t{}\n", r.method, cell(&e.to_string()))),
        }
    }
    out
}

pub fn label(
    lemmas: &[LemmaData],
    definitions: &HashMap<String, String>,
    provider: &Provider,
    config: &RunConfig,
    jobs: usize,
    outcome: &mut Outcome,
) -> Result<LabelRun> {
    let label_config = config.label_config()?;
    let runs = par_map(jobs, lemmas, |l| label_lemma(l, definitions, provider, label_config));
    let mut run = LabelRun::default();
    for r in runs {
        run.labels.extend(r.labels);
        run.warnings.extend(r.warnings);
        run.failures.extend(r.failures);
    }
    for w in &run.warnings {
        warn(w);
    }
    for f in &run.failures {
        outcome.fail(format!("label {} cluster {}: {}", f.lemma, f.cluster, f.error));
    }
    Ok(run)
}

/// Labels from `labels` when configured, otherwise computed from definitions.
pub fn labels_for_run(
    lemmas: &[LemmaData],
    provider: &Provider,
    config: &RunConfig,
    jobs: usize,
    outcome: &mut Outcome,
) -> Result<Vec<SenseLabel>> {
    match &config.labels {
        Some(path) => read_labels(path).map_err(input),
        None => {
            if config.definitions.is_none() {
                return Err(ConfigError::new("labels", "required unless definitions are given").into());
            }
            let defs = load_definition_index(config)?;
            Ok(label(lemmas, &defs, provider, config, jobs, outcome)?.labels)
        }
    }
}

/// Vectors of one lemma in one representation, in usage-id order.
pub fn space_vectors<P: EmbeddingProvider + ?Sized>(
    lemma: &LemmaData,
    representation: Representation,
    definitions: &HashMap<String, String>,
    provider: &P,
) -> std::result::Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut usages: Vec<_> = lemma.usages.iter().collect();
    usages.sort_by(|a, b| a.id.cmp(&b.id));
    let ids: Vec<String> = usages.iter().map(|u| u.id.clone()).collect();
    let vectors = match representation {
        Representation::Definition => {
            let texts = usages
                .iter()
                .map(|u| {
                    definitions
                        .get(&u.id)
                        .map(String::as_str)
                        .ok_or_else(|| format!("no definition for usage {}", u.id))
                })
                .collect::<std::result::Result<Vec<&str>, String>>()?;
            provider.embed_texts(&texts, Subject::Definition)
        }
        Representation::Sentence => {
            let texts: Vec<&str> = usages.iter().map(|u| u.context.as_str()).collect();
            provider.embed_texts(&texts, Subject::Sentence)
        }
        Representation::Token => {
            let requests = usages
                .iter()
                .map(|u| TokenSpanRequest::new(u.context.clone(), u.target_span.0, u.target_span.1))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            provider.embed_spans(&requests)
        }
    }
    .map_err(|e| e.to_string())?;
    Ok((ids, vectors.into_iter().map(|v| v.values).collect()))
}

pub struct GoldDispersion {
    pub lemma: String,
    pub representation: Representation,
    pub n: usize,
    pub separation: Option<f64>,
    pub cohesion: Option<f64>,
    pub ratio: Option<f64>,
    pub note: String,
}

pub struct SpaceRun {
    pub reports: Vec<SpaceReport>,
    pub gold: Vec<GoldDispersion>,
    /// (lemma, representation, projection TSV body).
    pub projections: Vec<(String, Representation, String)>,
}

pub fn analyze(
    lemmas: &[LemmaData],
    definitions: &HashMap<String, String>,
    provider: &Provider,
    config: &RunConfig,
    jobs: usize,
    outcome: &mut Outcome,
) -> Result<SpaceRun> {
    let seed = config.require_seed()?;
    let kselect = config.kselect()?;
    let representations = config.representations()?;
    let tasks: Vec<(&LemmaData, Representation)> =
        representations.iter().flat_map(|&r| lemmas.iter().map(move |l| (l, r))).collect();
    let results = par_map(jobs, &tasks, |(lemma, rep)| {
        let (ids, vectors) = space_vectors(lemma, *rep, definitions, provider)?;
        let (report, _) = analyze_space(&lemma.lemma, *rep, &vectors, seed, &kselect).map_err(|e| e.to_string())?;
        let gold = match dwug_cluster_dispersion(&vectors, &ids, &lemma.clusters) {
            Ok(d) => GoldDispersion {
                lemma: lemma.lemma.clone(),
                representation: *rep,
                n: vectors.len(),
                separation: Some(d.separation),
                cohesion: Some(d.cohesion),
                ratio: d.ratio,
                note: String::new(),
            },
            Err(e) => GoldDispersion {
                lemma: lemma.lemma.clone(),
                representation: *rep,
                n: vectors.len(),
                separation: None,
                cohesion: None,
                ratio: None,
                note: e.to_string(),
            },
        };
        let cluster_of: HashMap<&str, i64> = lemma.clusters.iter().map(|c| (c.usage_id.as_str(), c.cluster)).collect();
        let clusters: Vec<i64> =
            ids.iter().map(|id| cluster_of.get(id.as_str()).copied().unwrap_or(NOISE_CLUSTER)).collect();
        let projection = pca_project(&vectors, 2).map_err(|e| e.to_string())?;
        Ok::<_, String>((report, gold, projection_tsv(&ids, &projection, &clusters)))
    });
    let mut run = SpaceRun { reports: Vec::new(), gold: Vec::new(), projections: Vec::new() };
    for ((lemma, rep), r) in tasks.iter().zip(results) {
        match r {
            Ok((report, gold, projection)) => {
                run.reports.push(report);
                run.gold.push(gold);
                run.projections.push((lemma.lemma.clone(), *rep, projection));
            }
            Err(e) => outcome.fail(format!("analyze-space {} {rep}: {e}", lemma.lemma)),
        }
    }
    Ok(run)
}

pub const GOLD_DISPERSION_HEADER: &str = "lemma\trepresentation\tn\tseparation\tcohesion\tratio\tnote";

pub fn gold_dispersion_tsv(rows: &[GoldDispersion]) -> String {
    let mut out = format!("{GOLD_DISPERSION_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.lemma,
            r.representation,
            r.n,
            fmt_opt(r.separation),
            fmt_opt(r.cohesion),
            fmt_opt(r.ratio),
            cell(&r.note)
        ));
    }
    out
}

pub fn dynamics(
    lemmas: &[LemmaData],
    labels: &[SenseLabel],
    provider: &Provider,
    config: &RunConfig,
    jobs: usize,
    outcome: &mut Outcome,
) -> Result<Vec<DynamicsMap>> {
    let dyn_config = config.dynamics_config()?;
    let built = par_map(jobs, lemmas, |l| build_map(l, labels, provider, dyn_config));
    let mut maps = Vec::new();
    for (l, m) in lemmas.iter().zip(built) {
        match m {
            Ok(m) => maps.push(m),
            Err(e) => outcome.fail(format!("dynamics {}: {e}", l.lemma)),
        }
    }
    if config.dynamics.global_stats {
        let all: Vec<f64> = maps.iter().flat_map(|m| m.similarities()).collect();
        if !all.is_empty() {
            let stats = population_stats(&all);
            for m in &mut maps {
                m.reselect(dyn_config.z, Some(stats));
            }
        }
    }
    for m in &maps {
        for w in &m.warnings {
            warn(w);
        }
    }
    Ok(maps)
}

pub fn dynamics_dot(maps: &[DynamicsMap]) -> String {
    maps.iter().map(DynamicsMap::to_dot).collect::<Vec<_>>().join("\n")
}

pub fn load_eval_instances(config: &RunConfig) -> Result<(String, Vec<EvalInstance>)> {
    let path = config.eval.instances.as_deref().ok_or_else(|| ConfigError::new("eval.instances", "required"))?;
    let instances = load_instances(path).map_err(input)?;
    let dataset = config.eval.dataset.clone().unwrap_or_else(|| {
        Path::new(path).file_stem().map_or_else(|| "instances".to_string(), |s| s.to_string_lossy().into_owned())
    });
    Ok((dataset, instances))
}

pub fn token_embedder<'a>(config: &RunConfig, provider: &'a Provider) -> Result<Box<dyn TokenEmbedder + 'a>> {
    Ok(match config.token_mode()? {
        TokenMode::Isolated => Box::new(IsolatedTokens(provider)),
        TokenMode::Contextual => Box::new(ContextualTokens(provider)),
    })
}

pub fn run_eval(
    dataset: &str,
    instances: &[EvalInstance],
    provider: &Provider,
    config: &RunConfig,
    jobs: usize,
) -> Result<(EvalSummary, Vec<InstanceScores>)> {
    let tokens = token_embedder(config, provider)?;
    evaluate(dataset, instances, tokens.as_ref(), jobs).map_err(input)
}
