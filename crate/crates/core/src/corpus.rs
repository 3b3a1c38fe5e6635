//! Document ingestion, sentence segmentation and sentence-length statistics.
//!
//! Documents arrive either as jsonl (one object per line with `doc_id`,
//! `source_kind`, `text` and an optional `meta` object) or as a directory of
//! plain-text files. Already segmented corpora can be loaded from a jsonl of
//! sentences (`sent_id`, `doc_id`, `ordinal`, `text`).
//!
//! Segmentation is a deterministic rule: a sentence ends at a run of `.`, `!`
//! or `?` (optionally followed by closing quotes or brackets) when the next
//! non-space character is uppercase or the text ends. A period closing one of
//! the [`ABBREVIATIONS`] never ends a sentence. Tokens are whitespace-delimited
//! runs, so splitting never changes the token count of a document.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line} of {path}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("duplicate sent_id {0:?}")]
    DuplicateSentId(String),
    #[error("document {0:?} has no text")]
    EmptyText(String),
    #[error("no sentences in the selected scope")]
    EmptySelection,
}

/// Where a document comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceKind {
    #[serde(rename = "AR")]
    AnnualReport,
    #[serde(rename = "SR")]
    SustainabilityReport,
    #[serde(rename = "EC")]
    EarningsCall,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [
        SourceKind::AnnualReport,
        SourceKind::SustainabilityReport,
        SourceKind::EarningsCall,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SourceKind::AnnualReport => "AR",
            SourceKind::SustainabilityReport => "SR",
            SourceKind::EarningsCall => "EC",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AR" | "ANNUAL_REPORT" | "ANNUALREPORT" => Ok(SourceKind::AnnualReport),
            "SR" | "SUSTAINABILITY_REPORT" | "SUSTAINABILITYREPORT" => {
                Ok(SourceKind::SustainabilityReport)
            }
            "EC" | "EARNINGS_CALL" | "EARNINGSCALL" => Ok(SourceKind::EarningsCall),
            other => Err(format!("unknown source kind {other:?} (expected AR, SR or EC)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source_kind: SourceKind,
    pub text: String,
    /// Optional metadata such as `company_id`, `country`, `industry_code`,
    /// `year` and `quarter`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub token_count: usize,
}

impl Sentence {
    pub fn new(doc_id: &str, ordinal: usize, text: &str) -> Self {
        let text = text.trim();
        Sentence {
            sent_id: format!("{doc_id}:{ordinal}"),
            doc_id: doc_id.to_string(),
            ordinal,
            text: text.to_string(),
            token_count: count_tokens(text),
        }
    }
}

/// Number of whitespace-delimited tokens.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercased tokens whose final period does not end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "inc.", "ltd.", "co.", "corp.",
    "plc.", "llc.", "bros.", "u.s.", "u.k.", "e.u.", "u.n.", "e.g.", "i.e.", "vs.", "approx.",
    "no.", "nos.", "fig.", "figs.", "dept.", "est.", "mt.", "vol.", "ca.", "jan.", "feb.",
    "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 6] = ['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: [char; 5] = ['"', '\'', '\u{201c}', '\u{2018}', '('];

fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(|c| OPENERS.contains(&c));
    let lower = token.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits `text` into trimmed sentence slices.
///
/// Total and deterministic: any text with at least one non-space character
/// yields at least one sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && TERMINATORS.contains(&chars[j + 1].1) {
            j += 1;
        }
        let single_period = c == '.' && j == i;
        while j + 1 < chars.len() && CLOSERS.contains(&chars[j + 1].1) {
            j += 1;
        }
        let end = chars.get(j + 1).map_or(text.len(), |&(b, _)| b);

        let mut k = j + 1;
        if k < chars.len() && !chars[k].1.is_whitespace() {
            i = j + 1;
            continue;
        }
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = if k >= chars.len() {
            true
        } else {
            let next = chars[k].1;
            next.is_uppercase()
                || (OPENERS.contains(&next)
                    && chars.get(k + 1).is_some_and(|&(_, n)| n.is_uppercase()))
        };

        if boundary {
            let token_start = text[..end]
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + text[p..].chars().next().map_or(1, char::len_utf8));
            let guarded = single_period && is_abbreviation(&text[token_start..end]);
            if !guarded {
                let piece = text[start..end].trim();
                if !piece.is_empty() {
                    out.push(piece);
                }
                start = end;
            }
        }
        i = j + 1;
    }

    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// Segments a document into sentences with ordinals `0..n`.
pub fn segment_sentences(document: &Document) -> Vec<Sentence> {
    split_sentences(&document.text)
        .into_iter()
        .enumerate()
        .map(|(ordinal, text)| Sentence::new(&document.doc_id, ordinal, text))
        .collect()
}

/// Documents and their sentences, in ingestion order.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    documents: Vec<Document>,
    doc_index: HashMap<String, usize>,
    sentences: Vec<Sentence>,
    sentence_sources: Vec<SourceKind>,
    sent_ids: HashMap<String, usize>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a document and its segmented sentences.
    pub fn add_document(&mut self, document: Document) -> Result<(), CorpusError> {
        if document.doc_id.is_empty() {
            return Err(CorpusError::EmptyText(String::new()));
        }
        if document.text.trim().is_empty() {
            return Err(CorpusError::EmptyText(document.doc_id));
        }
        if self.doc_index.contains_key(&document.doc_id) {
            return Err(CorpusError::DuplicateDocId(document.doc_id));
        }
        let sentences = segment_sentences(&document);
        for s in &sentences {
            if self.sent_ids.contains_key(&s.sent_id) {
                return Err(CorpusError::DuplicateSentId(s.sent_id.clone()));
            }
        }
        let kind = document.source_kind;
        self.doc_index
            .insert(document.doc_id.clone(), self.documents.len());
        self.documents.push(document);
        for s in sentences {
            self.push_sentence(s, kind);
        }
        Ok(())
    }

    /// Adds an already segmented sentence. The source kind is taken from the
    /// owning document when it is in the store, otherwise from `source_kind`.
    pub fn add_sentence(
        &mut self,
        sentence: Sentence,
        source_kind: Option<SourceKind>,
    ) -> Result<(), String> {
        if sentence.text.trim().is_empty() {
            return Err(format!("sentence {:?} has no text", sentence.sent_id));
        }
        if self.sent_ids.contains_key(&sentence.sent_id) {
            return Err(format!("duplicate sent_id {:?}", sentence.sent_id));
        }
        let kind = match self.doc_index.get(&sentence.doc_id) {
            Some(&idx) => self.documents[idx].source_kind,
            None => source_kind.ok_or_else(|| {
                format!(
                    "sentence {:?} refers to unknown document {:?} and carries no source_kind",
                    sentence.sent_id, sentence.doc_id
                )
            })?,
        };
        if let Some(prev) = self
            .sentences
            .iter()
            .rev()
            .find(|s| s.doc_id == sentence.doc_id)
        {
            if prev.ordinal >= sentence.ordinal {
                return Err(format!(
                    "ordinal {} of {:?} does not increase within document {:?}",
                    sentence.ordinal, sentence.sent_id, sentence.doc_id
                ));
            }
        }
        let sentence = Sentence::new_with_id(sentence);
        self.push_sentence(sentence, kind);
        Ok(())
    }

    fn push_sentence(&mut self, sentence: Sentence, kind: SourceKind) {
        self.sent_ids
            .insert(sentence.sent_id.clone(), self.sentences.len());
        self.sentences.push(sentence);
        self.sentence_sources.push(kind);
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, sent_id: &str) -> Option<&Sentence> {
        self.sent_ids.get(sent_id).map(|&i| &self.sentences[i])
    }

    /// Source kind of the sentence at `index` in [`CorpusStore::sentences`].
    pub fn source_at(&self, index: usize) -> SourceKind {
        self.sentence_sources[index]
    }

    /// Sentences paired with their source kind.
    pub fn iter_with_source(&self) -> impl Iterator<Item = (&Sentence, SourceKind)> {
        self.sentences
            .iter()
            .zip(self.sentence_sources.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

impl Sentence {
    // Recomputes derived fields of a sentence loaded from disk.
    fn new_with_id(sentence: Sentence) -> Sentence {
        let text = sentence.text.trim().to_string();
        Sentence {
            token_count: count_tokens(&text),
            text,
            ..sentence
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    Jsonl,
    /// Every `*.txt` file in the directories becomes one document whose
    /// `doc_id` is the file stem.
    PlainTextDir(SourceKind),
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: Option<String>,
    source_kind: Option<String>,
    text: Option<String>,
    #[serde(default)]
    meta: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Deserialize)]
struct RawSentence {
    sent_id: Option<String>,
    doc_id: Option<String>,
    ordinal: Option<usize>,
    text: Option<String>,
    source_kind: Option<String>,
}

fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn meta_value(v: serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s,
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn parse_document(path: &Path, line: usize, raw: &str) -> Result<Document, CorpusError> {
    let malformed = |reason: String| CorpusError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let rec: RawDocument =
        serde_json::from_str(raw).map_err(|e| malformed(format!("invalid json: {e}")))?;
    let doc_id = rec
        .doc_id
        .filter(|d| !d.is_empty())
        .ok_or_else(|| malformed("missing \"doc_id\"".into()))?;
    let source_kind = rec
        .source_kind
        .ok_or_else(|| malformed("missing \"source_kind\"".into()))?
        .parse::<SourceKind>()
        .map_err(malformed)?;
    let text = rec
        .text
        .ok_or_else(|| malformed("missing \"text\"".into()))?;
    if text.trim().is_empty() {
        return Err(malformed("empty \"text\"".into()));
    }
    let meta = rec
        .meta
        .unwrap_or_default()
        .into_iter()
        .map(|(k, v)| (k, meta_value(v)))
        .collect();
    Ok(Document {
        doc_id,
        source_kind,
        text,
        meta,
    })
}

/// Loads documents from jsonl files or plain-text directories.
///
/// Ingestion order is the order of `paths`, then line order (jsonl) or file
/// name order (plain text).
pub fn ingest_documents<P: AsRef<Path>>(
    paths: &[P],
    format: IngestFormat,
) -> Result<CorpusStore, CorpusError> {
    let mut store = CorpusStore::new();
    for path in paths {
        let path = path.as_ref();
        match format {
            IngestFormat::Jsonl => {
                for (line, raw) in jsonl_lines(path)? {
                    let doc = parse_document(path, line, &raw)?;
                    store.add_document(doc)?;
                }
            }
            IngestFormat::PlainTextDir(kind) => {
                let entries = fs::read_dir(path).map_err(|source| CorpusError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                    .collect();
                files.sort();
                for file in files {
                    let text = read_to_string(&file)?;
                    let doc_id = file
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    store.add_document(Document {
                        doc_id,
                        source_kind: kind,
                        text,
                        meta: BTreeMap::new(),
                    })?;
                }
            }
        }
    }
    Ok(store)
}

/// Loads a pre-segmented corpus (jsonl of sentences) into `store`.
///
/// Records need `sent_id`, `doc_id`, `ordinal` and `text`; `source_kind` is
/// required when the document is not already in the store.
pub fn ingest_sentences<P: AsRef<Path>>(
    store: &mut CorpusStore,
    paths: &[P],
) -> Result<(), CorpusError> {
    for path in paths {
        let path = path.as_ref();
        for (line, raw) in jsonl_lines(path)? {
            let malformed = |reason: String| CorpusError::Malformed {
                path: path.to_path_buf(),
                line,
                reason,
            };
            let rec: RawSentence =
                serde_json::from_str(&raw).map_err(|e| malformed(format!("invalid json: {e}")))?;
            let sent_id = rec
                .sent_id
                .ok_or_else(|| malformed("missing \"sent_id\"".into()))?;
            let doc_id = rec
                .doc_id
                .ok_or_else(|| malformed("missing \"doc_id\"".into()))?;
            let ordinal = rec
                .ordinal
                .ok_or_else(|| malformed("missing \"ordinal\"".into()))?;
            let text = rec
                .text
                .ok_or_else(|| malformed("missing \"text\"".into()))?;
            let kind = rec
                .source_kind
                .map(|k| k.parse::<SourceKind>())
                .transpose()
                .map_err(malformed)?;
            let sentence = Sentence {
                sent_id,
                doc_id,
                ordinal,
                token_count: 0,
                text,
            };
            store.add_sentence(sentence, kind).map_err(malformed)?;
        }
    }
    Ok(())
}

/// Token-count statistics of a set of sentences.
///
/// `std` is the sample standard deviation (zero for a single sentence);
/// quartiles use the nearest-rank definition, so they are always observed
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub p25: usize,
    pub p50: usize,
    pub p75: usize,
    pub max: usize,
}

/// Nearest-rank quantile of an ascending slice, `percent` in `1..=100`.
pub fn nearest_rank(sorted: &[usize], percent: usize) -> usize {
    let n = sorted.len();
    let rank = (percent * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

impl SentenceStats {
    pub fn from_token_counts(counts: &[usize]) -> Option<SentenceStats> {
        if counts.is_empty() {
            return None;
        }
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let mean = sorted.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = sorted.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(SentenceStats {
            count: n,
            mean,
            std,
            min: sorted[0],
            p25: nearest_rank(&sorted, 25),
            p50: nearest_rank(&sorted, 50),
            p75: nearest_rank(&sorted, 75),
            max: sorted[n - 1],
        })
    }

    pub fn csv_header() -> &'static str {
        "scope,count,mean,std,min,p25,p50,p75,max"
    }

    pub fn csv_row(&self, scope: &str) -> String {
        format!(
            "{scope},{},{:.4},{:.4},{},{},{},{},{}",
            self.count, self.mean, self.std, self.min, self.p25, self.p50, self.p75, self.max
        )
    }
}

/// Sentence statistics over the whole store or one source kind.
pub fn corpus_stats(
    store: &CorpusStore,
    filter: Option<SourceKind>,
) -> Result<SentenceStats, CorpusError> {
    let counts: Vec<usize> = store
        .iter_with_source()
        .filter(|(_, k)| filter.is_none_or(|f| f == *k))
        .map(|(s, _)| s.token_count)
        .collect();
    SentenceStats::from_token_counts(&counts).ok_or(CorpusError::EmptySelection)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            source_kind: SourceKind::AnnualReport,
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn two_terminated_clauses() {
        let s = segment_sentences(&doc("d", "We grow. We harvest trees."));
        let counts: Vec<_> = s.iter().map(|s| s.token_count).collect();
        assert_eq!(counts, vec![2, 3]);
        assert_eq!(s[0].text, "We grow.");
        assert_eq!(s[1].sent_id, "d:1");
    }

    #[test]
    fn no_terminator_is_one_sentence() {
        let s = segment_sentences(&doc("d", "no terminator here"));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].token_count, 3);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(split_sentences("Sales rose 5.2 percent. then fell."), vec![
            "Sales rose 5.2 percent. then fell."
        ]);
    }

    #[test]
    fn question_and_quotes() {
        assert_eq!(
            split_sentences("Why now?! \"Because.\" (Fine.) Done"),
            vec!["Why now?!", "\"Because.\"", "(Fine.)", "Done"]
        );
    }

    #[test]
    fn ellipsis_ends_sentence_even_after_abbreviation_like_token() {
        assert_eq!(split_sentences("Wait no... Then go."), vec!["Wait no...", "Then go."]);
    }

    #[test]
    fn stats_on_two_sentences() {
        let st = SentenceStats::from_token_counts(&[2, 4]).unwrap();
        assert_eq!(st.count, 2);
        assert_eq!(st.mean, 3.0);
        assert_eq!((st.min, st.max), (2, 4));
    }

    #[test]
    fn odd_length_median() {
        let st = SentenceStats::from_token_counts(&[5, 1, 3, 2, 4]).unwrap();
        assert_eq!(st.p50, 3);
        assert_eq!(st.p25, 2);
        assert_eq!(st.p75, 4);
    }

    #[test]
    fn empty_selection_is_error() {
        let mut store = CorpusStore::new();
        store.add_document(doc("a", "One. Two.")).unwrap();
        assert!(matches!(
            corpus_stats(&store, Some(SourceKind::EarningsCall)),
            Err(CorpusError::EmptySelection)
        ));
        assert_eq!(corpus_stats(&store, None).unwrap().count, 2);
    }

    #[test]
    fn duplicate_document_rejected() {
        let mut store = CorpusStore::new();
        store.add_document(doc("A", "x")).unwrap();
        assert!(matches!(
            store.add_document(doc("A", "y")),
            Err(CorpusError::DuplicateDocId(id)) if id == "A"
        ));
    }

    #[test]
    fn whitespace_only_text_rejected() {
        let mut store = CorpusStore::new();
        assert!(store.add_document(doc("A", "  \n ")).is_err());
    }

    #[test]
    fn presegmented_sentence_needs_known_source() {
        let mut store = CorpusStore::new();
        let s = Sentence::new("x", 0, "Hello there.");
        assert!(store.add_sentence(s.clone(), None).is_err());
        store
            .add_sentence(s, Some(SourceKind::EarningsCall))
            .unwrap();
        assert_eq!(store.source_at(0), SourceKind::EarningsCall);
        let again = Sentence::new("x", 0, "Dup ordinal.");
        assert!(store
            .add_sentence(
                Sentence {
                    sent_id: "x:new".into(),
                    ..again
                },
                Some(SourceKind::EarningsCall)
            )
            .is_err());
    }

    #[test]
    fn source_kind_codes_round_trip() {
        for k in SourceKind::ALL {
            assert_eq!(k.code().parse::<SourceKind>().unwrap(), k);
        }
        assert!("XX".parse::<SourceKind>().is_err());
    }
}
