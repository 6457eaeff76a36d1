use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

/// Definition-space analysis of diachronic word usage graphs.
///
/// Settings come from an optional TOML file (`--config`); flags override it.
/// Exit status: 0 success, 1 invalid configuration or input, 2 partial
/// failure (the failed items are listed on stderr).
#[derive(Debug, Parser)]
#[command(name = "defsense", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Corpus root with one directory per lemma.
    #[arg(long, global = true, value_name = "DIR")]
    pub corpus: Option<String>,
    /// Definitions JSONL.
    #[arg(long, global = true, value_name = "FILE")]
    pub definitions: Option<String>,
    /// Sense labels TSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub labels: Option<String>,
    /// Restrict to a lemma; repeatable.
    #[arg(long = "lemma", global = true, value_name = "NAME")]
    pub lemmas: Vec<String>,
    /// Embedding provider: fallback, file or remote.
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Embeddings file for the file provider.
    #[arg(long, global = true, value_name = "FILE")]
    pub embeddings: Option<String>,
    /// Base URL of the remote embedding service.
    #[arg(long, global = true, value_name = "URL")]
    pub embed_endpoint: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and print per-lemma counts.
    Ingest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce a definitions file, from a generator service or an existing file.
    Define {
        #[arg(long)]
        template: Option<String>,
        /// Base URL of the definition generator.
        #[arg(long, value_name = "URL")]
        endpoint: Option<String>,
        /// Take definitions from this JSONL file instead of a generator.
        #[arg(long, value_name = "FILE")]
        from_file: Option<String>,
        #[arg(long)]
        max_new_tokens: Option<usize>,
        #[arg(long)]
        max_context_chars: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precompute vectors into an embeddings file for the file provider.
    Embed {
        /// definitions, sentences, tokens or labels.
        #[arg(long)]
        what: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidate/reference pairs with text metrics.
    Score {
        /// bleu, rouge, meteor or bertf1; comma-separated or repeated.
        #[arg(long, value_delimiter = ',')]
        metric: Vec<String>,
        /// TSV with columns id, candidate, reference.
        #[arg(long, value_name = "FILE")]
        pairs: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate definition-based usage graphs with human judgements.
    Correlate {
        /// cosine, bleu, meteor, sentence, token or gold; comma-separated or repeated.
        #[arg(long, value_delimiter = ',')]
        method: Vec<String>,
        /// Which usage pairs get edges: gold or all.
        #[arg(long)]
        edges: Option<String>,
        /// Write each graph as JSON and DOT into this directory.
        #[arg(long, value_name = "DIR")]
        graphs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label usage clusters with a prototypical definition.
    Label {
        /// proto-def or proto-usage.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        min_cluster_size: Option<usize>,
        /// Write a side-by-side annotation sheet against `--against`.
        #[arg(long, value_name = "FILE", requires = "against")]
        human_eval: Option<PathBuf>,
        /// Labels of the second system for `--human-eval`.
        #[arg(long, value_name = "FILE")]
        against: Option<String>,
        #[arg(long)]
        max_examples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variance, k-means with silhouette-selected k, and dispersion of embedding spaces.
    AnalyzeSpace {
        /// definition, sentence or token; comma-separated or repeated.
        #[arg(long, value_delimiter = ',')]
        representation: Vec<String>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Dispersion under the gold clusters.
        #[arg(long, value_name = "FILE")]
        gold_dispersion: Option<PathBuf>,
        /// 2-D projections, one TSV per lemma and representation.
        #[arg(long, value_name = "DIR")]
        projections: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sense dynamics maps over period sub-clusters.
    Dynamics {
        #[arg(long)]
        z: Option<f64>,
        #[arg(long)]
        min_subcluster: Option<usize>,
        /// Pool the similarity statistics over all lemmas of the run.
        #[arg(long)]
        global_stats: bool,
        /// Map JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// DOT graph; stdout when neither this nor --json is given.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference-based evaluation of generated definitions.
    Eval {
        /// JSONL with id, lemma, context, start, end, gold, generated.
        #[arg(long, value_name = "FILE")]
        instances: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        /// Token vectors for BERT-F1: isolated or contextual.
        #[arg(long)]
        tokens: Option<String>,
        /// Per-instance scores.
        #[arg(long, value_name = "FILE")]
        scores: Option<PathBuf>,
        /// Correlations of scores with example properties.
        #[arg(long, value_name = "FILE")]
        properties: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every analysis and write a self-contained summary directory.
    Report {
        #[arg(long, value_name = "FILE")]
        instances: Option<String>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Define { .. } => "define",
            Command::Embed { .. } => "embed",
            Command::Score { .. } => "score",
            Command::Correlate { .. } => "correlate",
            Command::Label { .. } => "label",
            Command::AnalyzeSpace { .. } => "analyze-space",
            Command::Dynamics { .. } => "dynamics",
            Command::Eval { .. } => "eval",
            Command::Report { .. } => "report",
        }
    }
}

fn set<T: Clone>(target: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *target = v.clone();
    }
}

fn set_opt<T: Clone>(target: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        *target = value.clone();
    }
}

fn set_list(target: &mut Vec<String>, value: &[String]) {
    if !value.is_empty() {
        *target = value.to_vec();
    }
}

impl Cli {
    /// Copies every given flag over the configuration.
    pub fn apply(&self, c: &mut RunConfig) {
        let g = &self.global;
        set(&mut c.jobs, &g.jobs);
        set_opt(&mut c.seed, &g.seed);
        set_opt(&mut c.corpus, &g.corpus);
        set_opt(&mut c.definitions, &g.definitions);
        set_opt(&mut c.labels, &g.labels);
        set_list(&mut c.lemmas, &g.lemmas);
        set(&mut c.provider.kind, &g.provider);
        set_opt(&mut c.provider.path, &g.embeddings);
        set_opt(&mut c.provider.url, &g.embed_endpoint);
        match &self.command {
            Command::Ingest { .. } => {}
            Command::Define { template, endpoint, from_file, max_new_tokens, max_context_chars, .. } => {
                set(&mut c.generator.template, template);
                if endpoint.is_some() || from_file.is_some() {
                    c.generator.url = endpoint.clone();
                    c.generator.from_file = from_file.clone();
                }
                set(&mut c.generator.max_new_tokens, max_new_tokens);
                set_opt(&mut c.generator.max_context_chars, max_context_chars);
            }
            Command::Embed { what, .. } => set(&mut c.embed.what, what),
            Command::Score { metric, pairs, .. } => {
                set_list(&mut c.score.metrics, metric);
                set_opt(&mut c.score.pairs, pairs);
            }
            Command::Correlate { method, edges, .. } => {
                set_list(&mut c.graph.methods, method);
                set(&mut c.graph.pairs, edges);
            }
            Command::Label { method, min_cluster_size, max_examples, .. } => {
                set(&mut c.labelling.method, method);
                set(&mut c.labelling.min_cluster_size, min_cluster_size);
                set(&mut c.labelling.max_examples, max_examples);
            }
            Command::AnalyzeSpace { representation, k_min, k_max, restarts, max_iterations, .. } => {
                set_list(&mut c.space.representations, representation);
                set(&mut c.space.k_min, k_min);
                set(&mut c.space.k_max, k_max);
                set(&mut c.space.restarts, restarts);
                set(&mut c.space.max_iterations, max_iterations);
            }
            Command::Dynamics { z, min_subcluster, global_stats, .. } => {
                set(&mut c.dynamics.z, z);
                set(&mut c.dynamics.min_subcluster_size, min_subcluster);
                if *global_stats {
                    c.dynamics.global_stats = true;
                }
            }
            Command::Eval { instances, dataset, tokens, .. } => {
                set_opt(&mut c.eval.instances, instances);
                set_opt(&mut c.eval.dataset, dataset);
                set(&mut c.eval.tokens, tokens);
            }
            Command::Report { instances, .. } => set_opt(&mut c.eval.instances, instances),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let mut c = RunConfig::from_toml("seed = 1\n[dynamics]\nz = 2.0\nmin_subcluster_size = 5\n").unwrap();
        let cli =
            Cli::try_parse_from(["defsense", "dynamics", "--z", "1.5", "--seed", "9", "--lemma", "record"]).unwrap();
        cli.apply(&mut c);
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.dynamics.z, 1.5);
        assert_eq!(c.dynamics.min_subcluster_size, 5);
        assert_eq!(c.lemmas, vec!["record".to_string()]);
    }

    #[test]
    fn method_lists_split_on_commas() {
        let mut c = RunConfig::default();
        let cli =
            Cli::try_parse_from(["defsense", "correlate", "--method", "cosine,token", "--method", "sentence"]).unwrap();
        cli.apply(&mut c);
        assert_eq!(c.graph.methods, vec!["cosine", "token", "sentence"]);
    }
}
