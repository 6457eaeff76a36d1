use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

pub const TOOL_VERSION: &str = concat!("defsense ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn input<E: Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

pub fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Per-item problems of a run that still produced output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn fail(&mut self, what: impl Display) {
        self.failures.push(what.to_string());
    }
}

pub fn warn(message: impl Display) {
    eprintln!("warning: {message}");
}

/// Provenance written at the top of every output file as `key=value` lines.
#[derive(Debug, Clone)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str, config: &RunConfig, providers: &[&str]) -> Self {
        let mut entries = vec![
            ("tool".to_string(), TOOL_VERSION.to_string()),
            ("command".to_string(), command.to_string()),
            ("config_hash".to_string(), config.hash(command)),
            ("seed".to_string(), config.seed.map_or("none".to_string(), |s| s.to_string())),
        ];
        let providers = if providers.is_empty() { "none".to_string() } else { providers.join(",") };
        entries.push(("provider".to_string(), providers));
        entries.push(("config".to_string(), config.canonical_json()));
        Self { entries }
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn lines(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    fn prefixed(&self, prefix: &str, suffix: &str) -> String {
        self.lines().iter().map(|l| format!("{prefix}{l}{suffix}\n")).collect()
    }

    /// For TSV and JSON-lines files.
    pub fn hash_comments(&self) -> String {
        self.prefixed("# ", "")
    }

    pub fn dot_comments(&self) -> String {
        self.prefixed("// ", "")
    }

    pub fn markdown_comments(&self) -> String {
        self.prefixed("<!-- ", " -->")
    }

    /// `{"meta": {...}, "data": ...}` with the metadata first.
    pub fn json_document(&self, data: &serde_json::Value) -> String {
        let meta: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(k, v)| {
                let value = match k.as_str() {
                    "config" => serde_json::from_str(v).expect("config is JSON"),
                    _ => serde_json::Value::String(v.clone()),
                };
                (k.clone(), value)
            })
            .collect();
        let meta = serde_json::to_string(&meta).expect("meta serializes");
        let data = serde_json::to_string_pretty(data).expect("data serializes");
        format!("{{\"meta\": {meta},\n\"data\": {data}}}\n")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    fs::write(path, contents).map_err(io_error(path))
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(contents.as_bytes()).and_then(|_| out.flush()).map_err(io_error(Path::new("<stdout>")))
        }
    }
}

pub fn tsv(meta: &Meta, body: &str) -> String {
    format!("{}{body}", meta.hash_comments())
}

/// Order-preserving map over at most `jobs` threads.
pub fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

/// TSV cells hold no tabs or newlines.
pub fn cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}
