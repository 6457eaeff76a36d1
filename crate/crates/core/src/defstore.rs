//! Prompts, definition cleaning, the definitions JSONL store and the client
//! for a remote definition generator.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::batch::map_batches;
use crate::corpus::Usage;
use crate::http::{HttpError, JsonClient, RetryPolicy};

pub const PLACEHOLDER: &str = "{w}";
pub const DEFAULT_TEMPLATE: &str = "postfix-question";
pub const DEFAULT_MAX_NEW_TOKENS: usize = 32;

#[derive(Debug, Error)]
pub enum DefStoreError {
    #[error("template {0:?} must contain exactly one {{w}} placeholder")]
    InvalidTemplate(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("definition is empty after cleaning")]
    EmptyDefinition,
    #[error("usage {usage_id}: generator request failed: {source}")]
    Generator {
        usage_id: String,
        #[source]
        source: HttpError,
    },
    #[error("usage {usage_id}: generator returned no item")]
    MissingItem { usage_id: String },
    #[error("usage {usage_id}: generator returned an empty definition")]
    EmptyResponse { usage_id: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    MalformedLine { path: PathBuf, line: usize, reason: String },
    #[error("usage {0} has more than one definition")]
    DuplicateDefinition(String),
}

pub type Result<T> = std::result::Result<T, DefStoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Prefix,
    Postfix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    instruction: String,
    position: Position,
}

impl PromptTemplate {
    pub fn new(instruction: impl Into<String>, position: Position) -> Result<Self> {
        let instruction = instruction.into();
        if instruction.matches(PLACEHOLDER).count() != 1 {
            return Err(DefStoreError::InvalidTemplate(instruction));
        }
        Ok(Self { instruction, position })
    }

    /// Built-in templates by name; see [`TEMPLATE_NAMES`].
    pub fn named(name: &str) -> Result<Self> {
        let (instruction, position) = match name {
            "postfix-question" => ("What is the definition of {w}?", Position::Postfix),
            "prefix-question" => ("What is the definition of {w}?", Position::Prefix),
            "postfix-give" => ("Give the definition of {w}.", Position::Postfix),
            "prefix-give" => ("Give the definition of {w}:", Position::Prefix),
            "define-word" => ("Define the word {w}:", Position::Prefix),
            "define" => ("Define {w}:", Position::Prefix),
            other => return Err(DefStoreError::UnknownTemplate(other.to_string())),
        };
        Self::new(instruction, position)
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn render(&self, context: &str, lemma: &str) -> String {
        let instruction = self.instruction.replace(PLACEHOLDER, lemma);
        match self.position {
            Position::Postfix => format!("{context} {instruction}"),
            Position::Prefix => format!("{instruction} {context}"),
        }
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::named(DEFAULT_TEMPLATE).expect("built-in template")
    }
}

pub const TEMPLATE_NAMES: &[&str] =
    &["postfix-question", "prefix-question", "postfix-give", "prefix-give", "define-word", "define"];

pub fn build_prompt(usage: &Usage, template: &PromptTemplate) -> String {
    template.render(&usage.context, &usage.lemma)
}

/// sha256 of the rendered prompt, hex.
pub fn prompt_fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub usage_id: String,
    pub lemma: String,
    #[serde(rename = "definition")]
    pub text: String,
    pub generator_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanedDefinition {
    pub text: String,
    /// The lemma occurs in the definition as a standalone token.
    pub circular: bool,
}

fn words_lower(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// True if the lemma's words occur contiguously as whole words of `text`,
/// ignoring case.
pub fn mentions_lemma(text: &str, lemma: &str) -> bool {
    let needle = words_lower(lemma);
    if needle.is_empty() {
        return false;
    }
    words_lower(text).windows(needle.len()).any(|w| w == needle.as_slice())
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Trims and collapses whitespace; circular definitions are flagged, not
/// altered.
pub fn clean_definition(text: &str, lemma: &str) -> Result<CleanedDefinition> {
    let text = collapse_whitespace(text);
    if text.is_empty() {
        return Err(DefStoreError::EmptyDefinition);
    }
    let circular = mentions_lemma(&text, lemma);
    Ok(CleanedDefinition { text, circular })
}

/// Comparison form of a label: trimmed, whitespace collapsed, one trailing
/// period removed, case-folded.
pub fn canonical_label(text: &str) -> String {
    let t = collapse_whitespace(text);
    let t = t.strip_suffix('.').unwrap_or(&t).trim_end();
    t.to_lowercase()
}

pub fn load_definitions(path: impl AsRef<Path>) -> Result<Vec<Definition>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DefStoreError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let def: Definition = serde_json::from_str(trimmed).map_err(|e| DefStoreError::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(def);
    }
    Ok(out)
}

/// Writes one JSON object per line, after `preamble` lines prefixed with `# `.
pub fn save_definitions(path: impl AsRef<Path>, definitions: &[Definition], preamble: &[String]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| DefStoreError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for line in preamble {
        writeln!(w, "# {line}").map_err(io_err)?;
    }
    for d in definitions {
        let json = serde_json::to_string(d).expect("definition serializes");
        writeln!(w, "{json}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// usage id → definition text.
pub fn index_definitions(definitions: &[Definition]) -> Result<HashMap<String, String>> {
    let mut map = HashMap::with_capacity(definitions.len());
    for d in definitions {
        if map.insert(d.usage_id.clone(), d.text.clone()).is_some() {
            return Err(DefStoreError::DuplicateDefinition(d.usage_id.clone()));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub url: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub max_new_tokens: usize,
    /// Forwarded to the generator; the client never truncates.
    pub max_context_chars: Option<usize>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl GeneratorConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            batch_size: 16,
            max_in_flight: 4,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            max_context_chars: None,
            timeout: Duration::from_secs(300),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct DefineItem<'a> {
    id: &'a str,
    prompt: String,
    banned_word: &'a str,
}

#[derive(Serialize)]
struct DefineRequest<'a> {
    items: Vec<DefineItem<'a>>,
    decoding: &'static str,
    max_new_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_context_chars: Option<usize>,
}

#[derive(Deserialize)]
struct DefineResponseItem {
    id: String,
    definition: String,
}

#[derive(Deserialize)]
struct DefineResponse {
    items: Vec<DefineResponseItem>,
    generator_id: String,
}

/// Client for `POST /v1/define`.
pub struct RemoteGenerator {
    client: JsonClient,
    config: GeneratorConfig,
}

impl RemoteGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        let client = JsonClient::new(&config.url, config.timeout, config.retry.clone());
        Self { client, config }
    }

    /// One result per usage, in input order. A failed batch fails each of its
    /// usages; other batches are unaffected.
    pub fn fetch_definitions(&self, usages: &[Usage], template: &PromptTemplate) -> Vec<Result<Definition>> {
        let prompts: Vec<String> = usages.iter().map(|u| build_prompt(u, template)).collect();
        let batches = map_batches(usages.len(), self.config.batch_size, self.config.max_in_flight, |range| {
            let body = DefineRequest {
                items: range
                    .clone()
                    .map(|i| DefineItem {
                        id: &usages[i].id,
                        prompt: prompts[i].clone(),
                        banned_word: &usages[i].lemma,
                    })
                    .collect(),
                decoding: "greedy",
                max_new_tokens: self.config.max_new_tokens,
                max_context_chars: self.config.max_context_chars,
            };
            let resp: std::result::Result<DefineResponse, HttpError> = self.client.post("/v1/define", &body);
            range.map(|i| self.assemble(&usages[i], &prompts[i], &resp)).collect::<Vec<_>>()
        });
        batches.into_iter().flatten().collect()
    }

    fn assemble(
        &self,
        usage: &Usage,
        prompt: &str,
        resp: &std::result::Result<DefineResponse, HttpError>,
    ) -> Result<Definition> {
        let usage_id = usage.id.clone();
        let resp =
            resp.as_ref().map_err(|e| DefStoreError::Generator { usage_id: usage_id.clone(), source: e.clone() })?;
        let item = resp
            .items
            .iter()
            .find(|it| it.id == usage.id)
            .ok_or_else(|| DefStoreError::MissingItem { usage_id: usage_id.clone() })?;
        let cleaned = clean_definition(&item.definition, &usage.lemma)
            .map_err(|_| DefStoreError::EmptyResponse { usage_id: usage_id.clone() })?;
        Ok(Definition {
            usage_id,
            lemma: usage.lemma.clone(),
            text: cleaned.text,
            generator_id: resp.generator_id.clone(),
            prompt_fingerprint: Some(prompt_fingerprint(prompt)),
        })
    }
}
