//! DWUG-layout corpora: usages, pairwise relatedness judgements and sense
//! clusters, one directory per lemma.
//!
//! ```text
//! <corpus>/<lemma>/uses.tsv       lemma pos grouping identifier context indexes_target_token ...
//! <corpus>/<lemma>/judgments.tsv  identifier1 identifier2 annotator judgment ...
//! <corpus>/<lemma>/clusters.tsv   identifier cluster
//! ```
//!
//! Files are tab-separated with a header row and no quoting. Extra columns
//! are ignored. Target spans are `start:end` character offsets (not bytes)
//! into the context.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Cluster id used by DWUG releases for unclustered usages.
pub const NOISE_CLUSTER: i64 = -1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow { path: PathBuf, line: u64, reason: String },
    #[error("{path}:{line}: duplicate identifier {id:?}")]
    DuplicateId { path: PathBuf, line: u64, id: String },
    #[error("lemma {lemma:?} not found under {corpus}")]
    UnknownLemma { corpus: PathBuf, lemma: String },
    #[error("field contains a tab or newline and cannot be written as TSV: {0:?}")]
    Unrepresentable(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One occurrence of a target lemma in context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Usage {
    pub id: String,
    pub lemma: String,
    pub pos: String,
    pub grouping: i64,
    pub context: String,
    /// `[start, end)` in characters.
    pub target_span: (usize, usize),
}

impl Usage {
    /// Text of the target token.
    pub fn target(&self) -> &str {
        let (s, e) = char_range_to_bytes(&self.context, self.target_span).expect("span validated at construction");
        &self.context[s..e]
    }

    /// Number of characters in the context.
    pub fn context_len(&self) -> usize {
        self.context.chars().count()
    }
}

/// Converts a character range into a byte range of `text`, or `None` if the
/// range is empty, reversed or out of bounds.
pub fn char_range_to_bytes(text: &str, (start, end): (usize, usize)) -> Option<(usize, usize)> {
    if start >= end {
        return None;
    }
    let mut bytes = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let s = bytes.nth(start)?;
    let e = bytes.nth(end - start - 1)?;
    Some((s, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgement {
    pub usage1: String,
    pub usage2: String,
    pub annotator: String,
    /// 1..=4 relatedness, 0 = cannot decide.
    pub score: u8,
}

/// Aggregated relatedness of an unordered usage pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldEdge {
    pub pair: PairKey,
    pub weight: f64,
    pub n_judgements: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub usage_id: String,
    /// [`NOISE_CLUSTER`] for unclustered usages.
    pub cluster: i64,
}

/// Unordered pair of usage ids, stored with the lexicographically smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey(String, String);

impl PairKey {
    /// Returns `None` for a self-pair.
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Option<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(PairKey(a, b)),
            std::cmp::Ordering::Greater => Some(PairKey(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.0, self.1)
    }
}

struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .has_headers(false)
            .flexible(true)
            .from_reader(file);
        let mut records = reader.records();
        let malformed =
            |line: u64, reason: String| CorpusError::MalformedRow { path: path.to_path_buf(), line, reason };
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| malformed(1, e.to_string()))?,
            None => return Err(malformed(1, "missing header row".into())),
        };
        let columns: HashMap<String, usize> =
            header.iter().enumerate().map(|(i, name)| (name.trim().to_string(), i)).collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(malformed(1, format!("header lacks column {col:?}")));
            }
        }
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                malformed(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table { path: path.to_path_buf(), columns, rows })
    }

    fn field<'r>(&self, line: u64, row: &'r [String], col: &str) -> Result<&'r str> {
        let idx = self.columns[col];
        row.get(idx).map(String::as_str).ok_or_else(|| CorpusError::MalformedRow {
            path: self.path.clone(),
            line,
            reason: format!("missing column {col:?}"),
        })
    }

    fn malformed(&self, line: u64, reason: impl Into<String>) -> CorpusError {
        CorpusError::MalformedRow { path: self.path.clone(), line, reason: reason.into() }
    }
}

fn parse_span(text: &str) -> Option<(usize, usize)> {
    let (s, e) = text.trim().split_once(':')?;
    Some((s.parse().ok()?, e.parse().ok()?))
}

pub fn parse_uses(path: impl AsRef<Path>) -> Result<Vec<Usage>> {
    let table =
        Table::read(path.as_ref(), &["lemma", "pos", "grouping", "identifier", "context", "indexes_target_token"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let line = *line;
        let id = table.field(line, row, "identifier")?.to_string();
        let grouping_raw = table.field(line, row, "grouping")?;
        let grouping: i64 = grouping_raw
            .trim()
            .parse()
            .map_err(|_| table.malformed(line, format!("grouping {grouping_raw:?} is not an integer")))?;
        let context = table.field(line, row, "context")?.to_string();
        let span_raw = table.field(line, row, "indexes_target_token")?;
        let span = parse_span(span_raw)
            .ok_or_else(|| table.malformed(line, format!("target offsets {span_raw:?} are not start:end integers")))?;
        let Some((bs, be)) = char_range_to_bytes(&context, span) else {
            return Err(table.malformed(
                line,
                format!("target span {}:{} outside context of {} chars", span.0, span.1, context.chars().count()),
            ));
        };
        if context[bs..be].trim().is_empty() {
            return Err(table.malformed(line, "target span covers only whitespace"));
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { path: table.path.clone(), line, id });
        }
        out.push(Usage {
            id,
            lemma: table.field(line, row, "lemma")?.to_string(),
            pos: table.field(line, row, "pos")?.to_string(),
            grouping,
            context,
            target_span: span,
        });
    }
    Ok(out)
}

pub fn parse_judgments(path: impl AsRef<Path>) -> Result<Vec<Judgement>> {
    let table = Table::read(path.as_ref(), &["identifier1", "identifier2", "annotator", "judgment"])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let line = *line;
        let usage1 = table.field(line, row, "identifier1")?.to_string();
        let usage2 = table.field(line, row, "identifier2")?.to_string();
        if usage1 == usage2 {
            return Err(table.malformed(line, format!("self-judgement on {usage1:?}")));
        }
        let raw = table.field(line, row, "judgment")?;
        let value: f64 =
            raw.trim().parse().map_err(|_| table.malformed(line, format!("judgment {raw:?} is not a number")))?;
        if value.fract() != 0.0 || !(0.0..=4.0).contains(&value) {
            return Err(table.malformed(line, format!("judgment {raw:?} outside {{0,1,2,3,4}}")));
        }
        out.push(Judgement {
            usage1,
            usage2,
            annotator: table.field(line, row, "annotator")?.to_string(),
            score: value as u8,
        });
    }
    Ok(out)
}

pub fn parse_clusters(path: impl AsRef<Path>) -> Result<Vec<ClusterAssignment>> {
    let table = Table::read(path.as_ref(), &["identifier", "cluster"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let line = *line;
        let usage_id = table.field(line, row, "identifier")?.to_string();
        let raw = table.field(line, row, "cluster")?;
        let cluster: i64 =
            raw.trim().parse().map_err(|_| table.malformed(line, format!("cluster {raw:?} is not an integer")))?;
        if !seen.insert(usage_id.clone()) {
            return Err(CorpusError::DuplicateId { path: table.path.clone(), line, id: usage_id });
        }
        out.push(ClusterAssignment { usage_id, cluster });
    }
    Ok(out)
}

fn median(sorted: &[u8]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
    }
}

/// Median of the non-zero scores per unordered pair. Pairs with only zero
/// judgements are dropped. Output is sorted by pair.
pub fn aggregate_judgements(judgements: &[Judgement]) -> Vec<GoldEdge> {
    let mut by_pair: BTreeMap<PairKey, Vec<u8>> = BTreeMap::new();
    for j in judgements {
        let Some(key) = PairKey::new(j.usage1.as_str(), j.usage2.as_str()) else {
            continue;
        };
        let scores = by_pair.entry(key).or_default();
        if j.score > 0 {
            scores.push(j.score);
        }
    }
    by_pair
        .into_iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(pair, mut scores)| {
            scores.sort_unstable();
            GoldEdge { pair, weight: median(&scores), n_judgements: scores.len() }
        })
        .collect()
}

fn check_field(s: &str) -> Result<&str> {
    if s.contains(['\t', '\n', '\r']) {
        Err(CorpusError::Unrepresentable(s.to_string()))
    } else {
        Ok(s)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

pub fn write_uses(path: impl AsRef<Path>, usages: &[Usage]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from("lemma\tpos\tgrouping\tidentifier\tcontext\tindexes_target_token\n");
    for u in usages {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}:{}\n",
            check_field(&u.lemma)?,
            check_field(&u.pos)?,
            u.grouping,
            check_field(&u.id)?,
            check_field(&u.context)?,
            u.target_span.0,
            u.target_span.1
        ));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_judgments(path: impl AsRef<Path>, judgements: &[Judgement]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from("identifier1\tidentifier2\tannotator\tjudgment\n");
    for j in judgements {
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            check_field(&j.usage1)?,
            check_field(&j.usage2)?,
            check_field(&j.annotator)?,
            j.score
        ));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_clusters(path: impl AsRef<Path>, clusters: &[ClusterAssignment]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from("identifier\tcluster\n");
    for c in clusters {
        body.push_str(&format!("{}\t{}\n", check_field(&c.usage_id)?, c.cluster));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

/// A validated lemma: usages, known-usage judgements and clusters.
#[derive(Debug, Clone)]
pub struct LemmaData {
    pub lemma: String,
    pub usages: Vec<Usage>,
    pub judgements: Vec<Judgement>,
    pub clusters: Vec<ClusterAssignment>,
    pub gold: Vec<GoldEdge>,
    /// Rows skipped during validation (unknown usages, missing files).
    pub warnings: Vec<String>,
}

impl LemmaData {
    pub fn load(corpus: impl AsRef<Path>, lemma: &str) -> Result<Self> {
        let dir = corpus.as_ref().join(lemma);
        if !dir.is_dir() {
            return Err(CorpusError::UnknownLemma { corpus: corpus.as_ref().to_path_buf(), lemma: lemma.to_string() });
        }
        let usages = parse_uses(dir.join("uses.tsv"))?;
        let known: HashSet<&str> = usages.iter().map(|u| u.id.as_str()).collect();
        let mut warnings = Vec::new();

        let mut judgements = parse_judgments(dir.join("judgments.tsv"))?;
        judgements.retain(|j| {
            let ok = known.contains(j.usage1.as_str()) && known.contains(j.usage2.as_str());
            if !ok {
                warnings.push(format!("{lemma}: judgement on unknown usage pair ({}, {}) skipped", j.usage1, j.usage2));
            }
            ok
        });

        let clusters_path = dir.join("clusters.tsv");
        let mut clusters = if clusters_path.exists() {
            parse_clusters(&clusters_path)?
        } else {
            warnings.push(format!("{lemma}: no clusters.tsv"));
            Vec::new()
        };
        clusters.retain(|c| {
            let ok = known.contains(c.usage_id.as_str());
            if !ok {
                warnings.push(format!("{lemma}: cluster row for unknown usage {} skipped", c.usage_id));
            }
            ok
        });

        let gold = aggregate_judgements(&judgements);
        Ok(LemmaData { lemma: lemma.to_string(), usages, judgements, clusters, gold, warnings })
    }

    pub fn usage(&self, id: &str) -> Option<&Usage> {
        self.usages.iter().find(|u| u.id == id)
    }

    pub fn usage_index(&self) -> HashMap<&str, &Usage> {
        self.usages.iter().map(|u| (u.id.as_str(), u)).collect()
    }

    /// Cluster id → sorted member ids, including the noise cluster.
    pub fn cluster_members(&self) -> BTreeMap<i64, Vec<String>> {
        let mut out: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        for c in &self.clusters {
            out.entry(c.cluster).or_default().push(c.usage_id.clone());
        }
        for members in out.values_mut() {
            members.sort();
        }
        out
    }

    pub fn periods(&self) -> BTreeSet<i64> {
        self.usages.iter().map(|u| u.grouping).collect()
    }
}

/// Lemma directory names under a corpus root, sorted.
pub fn list_lemmas(corpus: impl AsRef<Path>) -> Result<Vec<String>> {
    let corpus = corpus.as_ref();
    let entries = std::fs::read_dir(corpus).map_err(io_err(corpus))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(io_err(corpus))?;
        if entry.path().join("uses.tsv").is_file() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const USES_HEADER: &str = "lemma\tpos\tgrouping\tidentifier\tcontext\tindexes_target_token\n";

    #[test]
    fn target_text_from_char_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "uses.tsv", &format!("{USES_HEADER}word\tnn\t1\tu1\tI gave my word.\t10:14\n"));
        let uses = parse_uses(p).unwrap();
        assert_eq!(uses.len(), 1);
        assert_eq!(uses[0].target(), "word");
        assert_eq!(uses[0].target_span, (10, 14));
    }

    #[test]
    fn offsets_count_characters_not_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "uses.tsv", &format!("{USES_HEADER}café\tnn\t2\tu1\tLe café noir\t3:7\n"));
        assert_eq!(parse_uses(p).unwrap()[0].target(), "café");
    }

    #[test]
    fn span_past_end_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "uses.tsv", &format!("{USES_HEADER}word\tnn\t1\tu1\tI gave my word.\t10:99\n"));
        match parse_uses(p) {
            Err(CorpusError::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn non_integer_offsets_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "uses.tsv", &format!("{USES_HEADER}word\tnn\t1\tu1\tI gave my word.\tten:14\n"));
        assert!(matches!(parse_uses(p), Err(CorpusError::MalformedRow { .. })));
    }

    #[test]
    fn missing_header_column_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "uses.tsv", "lemma\tpos\tidentifier\tcontext\tindexes_target_token\n");
        match parse_uses(p) {
            Err(CorpusError::MalformedRow { line, reason, .. }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("grouping"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_identifier_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = USES_HEADER.to_string();
        for (i, id) in ["a", "b", "c", "b", "e"].iter().enumerate() {
            body.push_str(&format!("word\tnn\t{}\t{id}\tsome word here\t5:9\n", 1 + i % 2));
        }
        let p = write_tmp(&dir, "uses.tsv", &body);
        match parse_uses(p) {
            Err(CorpusError::DuplicateId { id, line, .. }) => {
                assert_eq!(id, "b");
                assert_eq!(line, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn judgement_range() {
        let dir = tempfile::tempdir().unwrap();
        let header = "identifier1\tidentifier2\tannotator\tjudgment\n";
        let ok = write_tmp(&dir, "ok.tsv", &format!("{header}u1\tu2\tann\t4\nu1\tu3\tann\t0.0\n"));
        let js = parse_judgments(ok).unwrap();
        assert_eq!(js[0].score, 4);
        assert_eq!(js[1].score, 0);
        let bad = write_tmp(&dir, "bad.tsv", &format!("{header}u1\tu2\tann\t5\n"));
        assert!(matches!(parse_judgments(bad), Err(CorpusError::MalformedRow { line: 2, .. })));
        let half = write_tmp(&dir, "half.tsv", &format!("{header}u1\tu2\tann\t2.5\n"));
        assert!(parse_judgments(half).is_err());
    }

    #[test]
    fn noise_cluster_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "clusters.tsv", "identifier\tcluster\nu17\t-1\n");
        let cs = parse_clusters(p).unwrap();
        assert_eq!(cs[0], ClusterAssignment { usage_id: "u17".into(), cluster: NOISE_CLUSTER });
    }

    fn j(a: &str, b: &str, score: u8) -> Judgement {
        Judgement { usage1: a.into(), usage2: b.into(), annotator: "x".into(), score }
    }

    #[test]
    fn aggregation_rules() {
        let edges = aggregate_judgements(&[
            j("a", "b", 4),
            j("b", "a", 4),
            j("c", "d", 3),
            j("c", "d", 4),
            j("e", "f", 0),
            j("e", "f", 3),
            j("g", "h", 0),
            j("g", "h", 0),
        ]);
        assert_eq!(edges.len(), 3);
        assert_eq!((edges[0].weight, edges[0].n_judgements), (4.0, 2));
        assert_eq!(edges[1].weight, 3.5);
        assert_eq!((edges[2].weight, edges[2].n_judgements), (3.0, 1));
        assert_eq!(edges[2].pair, PairKey::new("f", "e").unwrap());
        assert!(aggregate_judgements(&[]).is_empty());
    }

    #[test]
    fn fixture_lemma_loads_with_warnings() {
        let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
        let word = LemmaData::load(&corpus, "word").unwrap();
        assert_eq!(word.usages.len(), 13);
        assert_eq!(word.warnings.len(), 1, "{:?}", word.warnings);
        // w08-w13 is judged 0 by both annotators and drops out
        assert_eq!(word.gold.len(), 19);
        assert!(matches!(LemmaData::load(&corpus, "nope"), Err(CorpusError::UnknownLemma { .. })));
    }

    fn usage_strategy() -> impl Strategy<Value = Usage> {
        ("[a-z]{1,6}", "[A-Z]{1,3}", 1i64..4, "[a-z0-9_]{1,8}", "[ a-zA-Zé.,;!?]{0,12}", "[a-zé]{1,6}", "[ a-z.]{0,12}")
            .prop_map(|(lemma, pos, grouping, id, pre, target, post)| {
                let start = pre.chars().count();
                let end = start + target.chars().count();
                Usage { id, lemma, pos, grouping, context: format!("{pre}{target}{post}"), target_span: (start, end) }
            })
    }

    proptest! {
        #[test]
        fn tsv_round_trip(
            usages in proptest::collection::btree_map("[a-z0-9]{1,6}", usage_strategy(), 0..8),
            scores in proptest::collection::vec(0u8..=4, 0..8),
            clusters in proptest::collection::vec(-1i64..5, 0..8),
        ) {
            let usages: Vec<Usage> = usages.into_iter().map(|(id, mut u)| { u.id = id; u }).collect();
            let judgements: Vec<Judgement> = scores.iter().enumerate()
                .map(|(i, &s)| j(&format!("u{i}"), &format!("v{i}"), s)).collect();
            let cluster_rows: Vec<ClusterAssignment> = clusters.iter().enumerate()
                .map(|(i, &c)| ClusterAssignment { usage_id: format!("u{i}"), cluster: c }).collect();
            let dir = tempfile::tempdir().unwrap();
            write_uses(dir.path().join("u.tsv"), &usages).unwrap();
            write_judgments(dir.path().join("j.tsv"), &judgements).unwrap();
            write_clusters(dir.path().join("c.tsv"), &cluster_rows).unwrap();
            prop_assert_eq!(parse_uses(dir.path().join("u.tsv")).unwrap(), usages);
            prop_assert_eq!(parse_judgments(dir.path().join("j.tsv")).unwrap(), judgements);
            prop_assert_eq!(parse_clusters(dir.path().join("c.tsv")).unwrap(), cluster_rows);
        }

        #[test]
        fn aggregation_is_order_free_and_bounded(
            raw in proptest::collection::vec((0u8..4, 0u8..4, 0u8..=4), 0..30),
            seed in any::<u64>(),
        ) {
            let js: Vec<Judgement> = raw.iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, s)| j(&format!("u{a}"), &format!("u{b}"), *s))
                .collect();
            let mut shuffled = js.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate_judgements(&js);
            prop_assert_eq!(&a, &aggregate_judgements(&shuffled));
            for e in &a {
                prop_assert!((1.0..=4.0).contains(&e.weight));
            }
        }
    }
}
