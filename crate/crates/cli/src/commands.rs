use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use defsense_core::corpus::{LemmaData, NOISE_CLUSTER};
use defsense_core::defstore::{
    clean_definition, load_definitions, save_definitions, Definition, GeneratorConfig, RemoteGenerator,
};
use defsense_core::dynamics::DynamicsMap;
use defsense_core::embedder::{EmbeddingProvider, FileEmbeddings, Subject, TokenSpanRequest};
use defsense_core::evalharness::{
    correlations_tsv, example_property_correlations, scores_tsv, summary_tsv, EvalSummary,
};
use defsense_core::http::RetryPolicy;
use defsense_core::sense_labels::{labels_tsv, read_labels, write_human_eval, SenseLabel};
use defsense_core::space_stats::{report_tsv, Representation, SpaceReport};
use defsense_core::textmetrics::{score_pair, Metric};

use crate::args::Command;
use crate::config::{ConfigError, EmbedTarget, ProviderKind, RunConfig};
use crate::output::{cell, emit, input, io_error, par_map, tsv, warn, write_file, CliError, Meta, Outcome, Result};
use crate::pipeline::{self, MethodCorrelation};
use crate::provider::{build_provider, Provider};

const BLEU_NOTE: &str = "sentence-level, 13a tokens, exponential smoothing, case-sensitive";
const BERT_NOTE: &str = "greedy cosine matching, no idf, no rescaling";

pub fn run(command: &Command, config: &RunConfig) -> Result<Outcome> {
    let jobs = config.jobs()?;
    let name = command.name();
    match command {
        Command::Ingest { out } => ingest(config, out.as_deref()),
        Command::Define { out, .. } => define(config, out),
        Command::Embed { out, .. } => embed(config, out),
        Command::Score { out, .. } => score(config, jobs, out.as_deref()),
        Command::Correlate { graphs, out, .. } => correlate(config, jobs, graphs.as_deref(), out.as_deref()),
        Command::Label { human_eval, against, out, .. } => {
            label(config, jobs, human_eval.as_deref(), against.as_deref(), out.as_deref())
        }
        Command::AnalyzeSpace { gold_dispersion, projections, out, .. } => {
            analyze_space(config, jobs, out.as_deref(), gold_dispersion.as_deref(), projections.as_deref())
        }
        Command::Dynamics { json, out, .. } => dynamics(config, jobs, out.as_deref(), json.as_deref()),
        Command::Eval { scores, properties, out, .. } => {
            eval(config, jobs, out.as_deref(), scores.as_deref(), properties.as_deref())
        }
        Command::Report { out_dir, .. } => report(name, config, jobs, out_dir),
    }
}

fn ingest(config: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let lemmas = pipeline::load_corpus(config)?;
    let mut body = String::from("lemma\tusages\tjudgements\tgold_pairs\tclusters\tnoise\tperiods\twarnings\n");
    for l in &lemmas {
        let members = l.cluster_members();
        let clusters = members.keys().filter(|c| **c != NOISE_CLUSTER).count();
        let noise = members.get(&NOISE_CLUSTER).map_or(0, Vec::len);
        let periods: Vec<String> = l.periods().iter().map(i64::to_string).collect();
        writeln!(
            body,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.lemma,
            l.usages.len(),
            l.judgements.len(),
            l.gold.len(),
            clusters,
            noise,
            periods.join(","),
            l.warnings.len()
        )
        .unwrap();
    }
    emit(out, &tsv(&Meta::new("ingest", config, &[]), &body))?;
    Ok(Outcome::default())
}

fn define(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let template = config.template()?;
    let generator = config.generator_checked()?;
    let lemmas = pipeline::load_corpus(config)?;
    let mut outcome = Outcome::default();
    let mut defs = Vec::new();
    let mut accept = |d: Definition, outcome: &mut Outcome| match clean_definition(&d.text, &d.lemma) {
        Ok(c) => {
            if c.circular {
                warn(format!("{}: definition mentions the lemma {:?}", d.usage_id, d.lemma));
            }
            defs.push(Definition { text: c.text, ..d });
        }
        Err(e) => outcome.fail(format!("define {}: {e}", d.usage_id)),
    };
    if let Some(path) = &generator.from_file {
        let loaded = load_definitions(path).map_err(input)?;
        let mut by_id: HashMap<&str, &Definition> = HashMap::new();
        for d in &loaded {
            if by_id.insert(d.usage_id.as_str(), d).is_some() {
                return Err(CliError::Input(format!("{path}: duplicate definition for usage {}", d.usage_id)));
            }
        }
        for l in &lemmas {
            for u in &l.usages {
                match by_id.get(u.id.as_str()) {
                    Some(d) => accept(Definition { lemma: l.lemma.clone(), ..(*d).clone() }, &mut outcome),
                    None => outcome.fail(format!("define {}: no definition in {path}", u.id)),
                }
            }
        }
    } else {
        let url = generator.url.clone().expect("validated");
        let client = RemoteGenerator::new(GeneratorConfig {
            url,
            batch_size: generator.batch_size,
            max_in_flight: generator.max_in_flight,
            max_new_tokens: generator.max_new_tokens,
            max_context_chars: generator.max_context_chars,
            timeout: std::time::Duration::from_secs(generator.timeout_secs),
            retry: RetryPolicy::default(),
        });
        let usages: Vec<_> = lemmas.iter().flat_map(|l| l.usages.iter().cloned()).collect();
        for (u, r) in usages.iter().zip(client.fetch_definitions(&usages, &template)) {
            match r {
                Ok(d) => accept(d, &mut outcome),
                Err(e) => outcome.fail(format!("define {}: {e}", u.id)),
            }
        }
    }
    let generators: BTreeSet<&str> = defs.iter().map(|d| d.generator_id.as_str()).collect();
    let meta = Meta::new("define", config, &[])
        .with("generator", generators.into_iter().collect::<Vec<_>>().join(","))
        .with("template", &config.generator.template);
    save_definitions(out, &defs, &meta.lines()).map_err(input)?;
    Ok(outcome)
}

fn embed(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let target = config.embed_target()?;
    if config.provider_kind()? == ProviderKind::File {
        return Err(ConfigError::new("provider.kind", "embed computes vectors; use fallback or remote").into());
    }
    let provider = build_provider(config)?;
    let mut store: Option<FileEmbeddings> = None;
    let mut insert = |key: Insert<'_>, values: &[f64]| -> Result<()> {
        let s = store.get_or_insert_with(|| FileEmbeddings::new(values.len(), provider.provider_id()));
        match key {
            Insert::Text(t) => s.insert_text(t, values),
            Insert::Span(r) => s.insert_span(r, values),
        }
        .map_err(input)
    };
    match target {
        EmbedTarget::Definitions => {
            let defs = load_definitions(config.require_definitions()?).map_err(input)?;
            let keep: Option<BTreeSet<String>> = match &config.corpus {
                Some(_) => Some(
                    pipeline::load_corpus(config)?.iter().flat_map(|l| l.usages.iter().map(|u| u.id.clone())).collect(),
                ),
                None => None,
            };
            let texts: BTreeSet<&str> = defs
                .iter()
                .filter(|d| keep.as_ref().is_none_or(|k| k.contains(&d.usage_id)))
                .map(|d| d.text.as_str())
                .collect();
            embed_texts(&provider, &texts, Subject::Definition, &mut insert)?;
        }
        EmbedTarget::Sentences => {
            let lemmas = pipeline::load_corpus(config)?;
            let texts: BTreeSet<&str> =
                lemmas.iter().flat_map(|l| l.usages.iter().map(|u| u.context.as_str())).collect();
            embed_texts(&provider, &texts, Subject::Sentence, &mut insert)?;
        }
        EmbedTarget::Tokens => {
            let lemmas = pipeline::load_corpus(config)?;
            let requests = lemmas
                .iter()
                .flat_map(|l| l.usages.iter())
                .map(|u| TokenSpanRequest::new(u.context.clone(), u.target_span.0, u.target_span.1))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(input)?;
            let vectors = provider.embed_spans(&requests).map_err(input)?;
            for (r, v) in requests.iter().zip(&vectors) {
                insert(Insert::Span(r), &v.values)?;
            }
        }
        EmbedTarget::Labels => {
            let path =
                config.labels.as_deref().ok_or_else(|| ConfigError::new("labels", "required to embed labels"))?;
            let labels = read_labels(path).map_err(input)?;
            let texts: BTreeSet<&str> = labels.iter().map(|l| l.text.as_str()).collect();
            embed_texts(&provider, &texts, Subject::Label, &mut insert)?;
        }
    }
    let store = store.unwrap_or_else(|| FileEmbeddings::new(config.provider.dim, provider.provider_id()));
    let meta = Meta::new("embed", config, &[provider.provider_id()]).with("what", &config.embed.what);
    store.save(out, &meta.lines()).map_err(io_error(out))?;
    Ok(Outcome::default())
}

enum Insert<'a> {
    Text(&'a str),
    Span(&'a TokenSpanRequest),
}

fn embed_texts(
    provider: &Provider,
    texts: &BTreeSet<&str>,
    subject: Subject,
    insert: &mut impl FnMut(Insert<'_>, &[f64]) -> Result<()>,
) -> Result<()> {
    let texts: Vec<&str> = texts.iter().copied().collect();
    let vectors = provider.embed_texts(&texts, subject).map_err(input)?;
    for (t, v) in texts.iter().zip(&vectors) {
        insert(Insert::Text(t), &v.values)?;
    }
    Ok(())
}

struct ScorePair {
    id: String,
    candidate: String,
    reference: String,
}

fn read_pairs(path: &str) -> Result<Vec<ScorePair>> {
    let text = fs::read_to_string(path).map_err(io_error(Path::new(path)))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| CliError::Input(format!("{path}: missing header")))?;
    let columns: Vec<&str> = header.split('\t').collect();
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Input(format!("{path}: header lacks column {name:?}")))
    };
    let (id, cand, refr) = (col("id")?, col("candidate")?, col("reference")?);
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Input(format!(
                "{path}:{}: expected {} fields, found {}",
                i + 1,
                columns.len(),
                fields.len()
            )));
        }
        out.push(ScorePair {
            id: fields[id].to_string(),
            candidate: fields[cand].to_string(),
            reference: fields[refr].to_string(),
        });
    }
    Ok(out)
}

fn score(config: &RunConfig, jobs: usize, out: Option<&Path>) -> Result<Outcome> {
    let metrics = config.metrics()?;
    let path = config.score.pairs.as_deref().ok_or_else(|| ConfigError::new("score.pairs", "required"))?;
    let pairs = read_pairs(path)?;
    let needs_tokens = metrics.contains(&Metric::BertF1);
    let provider = if needs_tokens { Some(build_provider(config)?) } else { None };
    let tokens = match &provider {
        Some(p) => Some(pipeline::token_embedder(config, p)?),
        None => None,
    };
    let tokens = tokens.as_deref();
    let rows = par_map(jobs, &pairs, |p| {
        metrics.iter().map(|&m| score_pair(m, &p.candidate, &p.reference, tokens).map(|s| s.value)).collect::<Vec<_>>()
    });
    let mut outcome = Outcome::default();
    let mut body = String::from("id\tmetric\tvalue\n");
    for (p, values) in pairs.iter().zip(rows) {
        for (m, v) in metrics.iter().zip(values) {
            let value = match v {
                Ok(v) => v.to_string(),
                Err(e) => {
                    outcome.fail(format!("score {} {m}: {e}", p.id));
                    "NA".to_string()
                }
            };
            writeln!(body, "{}\t{m}\t{value}", cell(&p.id)).unwrap();
        }
    }
    let ids: Vec<&str> = provider.iter().map(|p| p.provider_id()).collect();
    let meta = Meta::new("score", config, &ids).with("bleu", BLEU_NOTE).with("bert_f1", BERT_NOTE);
    emit(out, &tsv(&meta, &body))?;
    Ok(outcome)
}

fn correlate(config: &RunConfig, jobs: usize, graphs_dir: Option<&Path>, out: Option<&Path>) -> Result<Outcome> {
    let methods = config.methods()?;
    let all_pairs = config.all_pairs()?;
    let lemmas = pipeline::load_corpus(config)?;
    let defs = pipeline::definitions_for_methods(config, &methods)?;
    let provider = build_provider(config)?;
    let mut outcome = Outcome::default();
    let results = pipeline::correlate(&lemmas, &defs, &provider, &methods, all_pairs, jobs, &mut outcome);
    let meta = Meta::new("correlate", config, &[provider.provider_id()]).with("correlation", "spearman, average ranks");
    if let Some(dir) = graphs_dir {
        write_graphs(dir, &meta, &results)?;
    }
    emit(out, &tsv(&meta, &pipeline::correlation_tsv(&results)))?;
    Ok(outcome)
}

fn write_graphs(dir: &Path, meta: &Meta, results: &[MethodCorrelation]) -> Result<()> {
    for r in results {
        for g in &r.graphs {
            let stem = format!("{}.{}", g.lemma, r.method);
            write_file(&dir.join(format!("{stem}.json")), &meta.json_document(&g.to_json_value()))?;
            write_file(&dir.join(format!("{stem}.dot")), &format!("{}{}", meta.dot_comments(), g.to_dot()))?;
        }
    }
    Ok(())
}

fn label(
    config: &RunConfig,
    jobs: usize,
    human_eval: Option<&Path>,
    against: Option<&str>,
    out: Option<&Path>,
) -> Result<Outcome> {
    config.label_config()?;
    let lemmas = pipeline::load_corpus(config)?;
    let defs = pipeline::load_definition_index(config)?;
    let provider = build_provider(config)?;
    let mut outcome = Outcome::default();
    let run = pipeline::label(&lemmas, &defs, &provider, config, jobs, &mut outcome)?;
    let meta = Meta::new("label", config, &[provider.provider_id()]);
    emit(out, &tsv(&meta, &labels_tsv(&run.labels)))?;
    if let (Some(path), Some(other)) = (human_eval, against) {
        let second = read_labels(other).map_err(input)?;
        write_human_eval(path, &lemmas, &run.labels, &second, config.labelling.max_examples, &meta.lines())
            .map_err(io_error(path))?;
    }
    Ok(outcome)
}

fn space_inputs(config: &RunConfig) -> Result<(Vec<LemmaData>, HashMap<String, String>, Provider)> {
    config.require_seed()?;
    config.kselect()?;
    let reps = config.representations()?;
    let lemmas = pipeline::load_corpus(config)?;
    let defs = if reps.contains(&Representation::Definition) || config.definitions.is_some() {
        pipeline::load_definition_index(config)?
    } else {
        HashMap::new()
    };
    Ok((lemmas, defs, build_provider(config)?))
}

fn analyze_space(
    config: &RunConfig,
    jobs: usize,
    out: Option<&Path>,
    gold: Option<&Path>,
    projections: Option<&Path>,
) -> Result<Outcome> {
    let (lemmas, defs, provider) = space_inputs(config)?;
    let mut outcome = Outcome::default();
    let run = pipeline::analyze(&lemmas, &defs, &provider, config, jobs, &mut outcome)?;
    let meta = Meta::new("analyze-space", config, &[provider.provider_id()]);
    emit(out, &tsv(&meta, &report_tsv(&run.reports)))?;
    if let Some(path) = gold {
        write_file(path, &tsv(&meta, &pipeline::gold_dispersion_tsv(&run.gold)))?;
    }
    if let Some(dir) = projections {
        for (lemma, rep, body) in &run.projections {
            write_file(&dir.join(format!("{lemma}.{rep}.tsv")), &tsv(&meta, body))?;
        }
    }
    Ok(outcome)
}

fn maps_json(maps: &[DynamicsMap]) -> serde_json::Value {
    serde_json::Value::Array(maps.iter().map(DynamicsMap::to_json_value).collect())
}

fn dynamics(config: &RunConfig, jobs: usize, out: Option<&Path>, json: Option<&Path>) -> Result<Outcome> {
    config.dynamics_config()?;
    let lemmas = pipeline::load_corpus(config)?;
    let provider = build_provider(config)?;
    let mut outcome = Outcome::default();
    let labels = pipeline::labels_for_run(&lemmas, &provider, config, jobs, &mut outcome)?;
    let maps = pipeline::dynamics(&lemmas, &labels, &provider, config, jobs, &mut outcome)?;
    let meta = Meta::new("dynamics", config, &[provider.provider_id()]).with("std", "population");
    if let Some(path) = json {
        write_file(path, &meta.json_document(&maps_json(&maps)))?;
    }
    if out.is_some() || json.is_none() {
        emit(out, &format!("{}{}", meta.dot_comments(), pipeline::dynamics_dot(&maps)))?;
    }
    Ok(outcome)
}

fn eval(
    config: &RunConfig,
    jobs: usize,
    out: Option<&Path>,
    scores: Option<&Path>,
    properties: Option<&Path>,
) -> Result<Outcome> {
    config.token_mode()?;
    let (dataset, instances) = pipeline::load_eval_instances(config)?;
    let provider = build_provider(config)?;
    let (summary, per_instance) = pipeline::run_eval(&dataset, &instances, &provider, config, jobs)?;
    let meta = Meta::new("eval", config, &[provider.provider_id()]).with("bleu", BLEU_NOTE).with("bert_f1", BERT_NOTE);
    emit(out, &tsv(&meta, &summary_tsv(&[summary])))?;
    if let Some(path) = scores {
        write_file(path, &tsv(&meta, &scores_tsv(&per_instance)))?;
    }
    if let Some(path) = properties {
        let rows = example_property_correlations(&instances, &per_instance);
        write_file(path, &tsv(&meta, &correlations_tsv(&rows)))?;
    }
    Ok(Outcome::default())
}

pub const REPORT_METHODS: [&str; 5] = ["cosine", "token", "sentence", "bleu", "meteor"];
pub const REPORT_REPRESENTATIONS: [&str; 3] = ["definition", "sentence", "token"];

fn report(name: &str, config: &RunConfig, jobs: usize, out_dir: &Path) -> Result<Outcome> {
    let mut config = config.clone();
    config.graph.methods = REPORT_METHODS.iter().map(|s| s.to_string()).collect();
    config.space.representations = REPORT_REPRESENTATIONS.iter().map(|s| s.to_string()).collect();
    let methods = config.methods()?;
    let all_pairs = config.all_pairs()?;
    config.label_config()?;
    config.dynamics_config()?;
    config.require_definitions()?;
    let eval_input = match &config.eval.instances {
        Some(_) => {
            config.token_mode()?;
            Some(pipeline::load_eval_instances(&config)?)
        }
        None => None,
    };
    let (lemmas, defs, provider) = space_inputs(&config)?;
    let meta = Meta::new(name, &config, &[provider.provider_id()]).with("std", "population");
    let mut outcome = Outcome::default();

    let correlations = pipeline::correlate(&lemmas, &defs, &provider, &methods, all_pairs, jobs, &mut outcome);
    write_file(&out_dir.join("correlation.tsv"), &tsv(&meta, &pipeline::correlation_tsv(&correlations)))?;
    write_graphs(&out_dir.join("graphs"), &meta, &correlations)?;

    let labels = pipeline::label(&lemmas, &defs, &provider, &config, jobs, &mut outcome)?.labels;
    write_file(&out_dir.join("labels.tsv"), &tsv(&meta, &labels_tsv(&labels)))?;

    let space = pipeline::analyze(&lemmas, &defs, &provider, &config, jobs, &mut outcome)?;
    write_file(&out_dir.join("space.tsv"), &tsv(&meta, &report_tsv(&space.reports)))?;
    write_file(&out_dir.join("gold_dispersion.tsv"), &tsv(&meta, &pipeline::gold_dispersion_tsv(&space.gold)))?;
    for (lemma, rep, body) in &space.projections {
        write_file(&out_dir.join("projections").join(format!("{lemma}.{rep}.tsv")), &tsv(&meta, body))?;
    }

    let maps = pipeline::dynamics(&lemmas, &labels, &provider, &config, jobs, &mut outcome)?;
    for m in &maps {
        let dir = out_dir.join("dynamics");
        write_file(&dir.join(format!("{}.json", m.lemma)), &meta.json_document(&m.to_json_value()))?;
        write_file(&dir.join(format!("{}.dot", m.lemma)), &format!("{}{}", meta.dot_comments(), m.to_dot()))?;
    }

    let eval = match eval_input {
        Some((dataset, instances)) => {
            let (summary, scores) = pipeline::run_eval(&dataset, &instances, &provider, &config, jobs)?;
            write_file(&out_dir.join("eval.tsv"), &tsv(&meta, &summary_tsv(std::slice::from_ref(&summary))))?;
            write_file(&out_dir.join("eval_scores.tsv"), &tsv(&meta, &scores_tsv(&scores)))?;
            let rows = example_property_correlations(&instances, &scores);
            write_file(&out_dir.join("eval_properties.tsv"), &tsv(&meta, &correlations_tsv(&rows)))?;
            Some(summary)
        }
        None => None,
    };

    let md = report_markdown(&ReportParts {
        config: &config,
        provider: provider.provider_id(),
        lemmas: &lemmas,
        correlations: &correlations,
        labels: &labels,
        space: &space.reports,
        maps: &maps,
        eval: eval.as_ref(),
        failures: &outcome.failures,
    });
    write_file(&out_dir.join("report.md"), &format!("{}{md}", meta.markdown_comments()))?;
    Ok(outcome)
}

struct ReportParts<'a> {
    config: &'a RunConfig,
    provider: &'a str,
    lemmas: &'a [LemmaData],
    correlations: &'a [MethodCorrelation],
    labels: &'a [SenseLabel],
    space: &'a [SpaceReport],
    maps: &'a [DynamicsMap],
    eval: Option<&'a EvalSummary>,
    failures: &'a [String],
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn md_cell(s: &str) -> String {
    cell(s).replace('|', "\\|")
}

fn report_markdown(p: &ReportParts<'_>) -> String {
    let mut s = String::from("# defsense report\n\n");
    let names: Vec<&str> = p.lemmas.iter().map(|l| l.lemma.as_str()).collect();
    writeln!(
        s,
        "Corpus `{}` ({} lemmas: {}), definitions `{}`, provider `{}`, seed {}.\n",
        p.config.corpus.as_deref().unwrap_or(""),
        names.len(),
        names.join(", "),
        p.config.definitions.as_deref().unwrap_or(""),
        p.provider,
        p.config.seed.map_or("none".to_string(), |x| x.to_string()),
    )
    .unwrap();

    s.push_str("## Usage graph correlation\n\n");
    s.push_str(
        "Spearman rho between edge weights and median human relatedness (`correlation.tsv`, graphs in `graphs/`).\n\n",
    );
    s.push_str(&format!("| method | {} | mean | pooled |\n", names.join(" | ")));
    s.push_str(&format!("|---|{}---|---|\n", "---|".repeat(names.len())));
    for r in p.correlations {
        let per: BTreeMap<&str, String> = r
            .summary
            .per_lemma
            .iter()
            .map(|(l, c)| (l.as_str(), c.as_ref().map_or("NA".to_string(), |c| f3(c.rho))))
            .collect();
        let cols: Vec<String> = names.iter().map(|n| per.get(n).cloned().unwrap_or_else(|| "NA".to_string())).collect();
        writeln!(
            s,
            "| {} | {} | {} | {} |",
            r.method,
            cols.join(" | "),
            r.summary.mean_of_lemmas.map_or("NA".to_string(), f3),
            r.summary.pooled.as_ref().map_or("NA".to_string(), |c| f3(c.rho))
        )
        .unwrap();
    }

    s.push_str("\n## Sense labels\n\n");
    writeln!(s, "Method `{}` (`labels.tsv`).\n", p.config.labelling.method).unwrap();
    s.push_str("| lemma | cluster | support | usage | label |\n|---|---|---|---|---|\n");
    for l in p.labels {
        writeln!(s, "| {} | {} | {} | {} | {} |", l.lemma, l.cluster, l.support, l.source_usage, md_cell(&l.text))
            .unwrap();
    }

    s.push_str("\n## Embedding spaces\n\n");
    s.push_str("k-means with silhouette-selected k (`space.tsv`, gold-cluster dispersion in `gold_dispersion.tsv`, projections in `projections/`).\n\n");
    s.push_str("| lemma | representation | n | variance | k | silhouette | separation | cohesion | ratio |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in p.space {
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.lemma,
            r.representation,
            r.n,
            f3(r.variance),
            r.k_opt,
            f3(r.silhouette),
            f3(r.separation),
            f3(r.cohesion),
            r.ratio.map_or("NA".to_string(), f3)
        )
        .unwrap();
    }

    s.push_str("\n## Sense dynamics\n\n");
    writeln!(
        s,
        "Edges between period sub-clusters of different senses whose label similarity exceeds mean + {} std (population).\n",
        p.config.dynamics.z
    )
    .unwrap();
    for m in p.maps {
        writeln!(s, "### {}\n", m.lemma).unwrap();
        let threshold = m.threshold.map_or("none".to_string(), f3);
        writeln!(
            s,
            "{} sub-clusters, {} candidate pairs, threshold {threshold}. Map: `dynamics/{}.dot`, `dynamics/{}.json`.\n",
            m.nodes.len(),
            m.candidate_edges.len(),
            m.lemma,
            m.lemma
        )
        .unwrap();
        if m.insufficient_pairs {
            s.push_str("- too few candidate pairs for outlier selection\n");
        }
        for r in &m.relations {
            writeln!(s, "- clusters {} and {}: max similarity {}", r.clusters.0, r.clusters.1, f3(r.max_similarity))
                .unwrap();
        }
        for h in &m.hints {
            writeln!(s, "- cluster {} from cluster {}: {}", h.newer, h.stable, h.text).unwrap();
        }
        for g in &m.merges {
            writeln!(s, "- clusters {} and {} share the label \"{}\": merge candidates", g.a, g.b, md_cell(&g.label))
                .unwrap();
        }
        if m.relations.is_empty() && m.merges.is_empty() && !m.insufficient_pairs {
            s.push_str("- no relations\n");
        }
        s.push('\n');
    }

    if let Some(e) = p.eval {
        let [bleu, rouge, bert, meteor] = e.percent();
        s.push_str("## Definition quality\n\n");
        s.push_str(
            "Mean sentence-level scores on a 0-100 scale (`eval.tsv`, `eval_scores.tsv`, `eval_properties.tsv`).\n\n",
        );
        s.push_str("| dataset | n | BLEU | ROUGE-L | BERT-F1 | METEOR |\n|---|---|---|---|---|---|\n");
        writeln!(
            s,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
            md_cell(&e.dataset),
            e.n,
            bleu,
            rouge,
            bert,
            meteor
        )
        .unwrap();
    }

    if !p.failures.is_empty() {
        s.push_str("## Failures\n\n");
        for f in p.failures {
            writeln!(s, "- {}", md_cell(f)).unwrap();
        }
        s.push('\n');
    }
    s
}
