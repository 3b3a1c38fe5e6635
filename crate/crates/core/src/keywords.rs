//! Stem-prefix keyword dictionaries for the water, forest and biodiversity
//! dimensions.
//!
//! Patterns are matched case-insensitively (ASCII folding) as substrings of
//! the sentence padded with one leading and one trailing space. Spaces inside
//! a pattern are literal, so `" lake"` only hits at a word start and `"hunt "`
//! only at a word end, while a bare stem such as `"environ"` hits every
//! inflection.
//!
//! Keyword lists ship as versioned plain-text resources under
//! `resources/keywords/`: one pattern per line, spaces preserved, `#` starts a
//! comment line.

use std::fmt;
use std::str::FromStr;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusStore, Sentence, SourceKind};
use crate::sampling;

#[derive(Debug, Error, PartialEq)]
pub enum KeywordError {
    #[error("line {line}: {reason}")]
    InvalidResource { line: usize, reason: String },
    #[error("duplicate pattern {0:?}")]
    DuplicatePattern(String),
    #[error("keyword set is empty")]
    EmptySet,
    #[error("corpus has no sentences")]
    EmptyCorpus,
    #[error("no pattern has a non-zero count")]
    AllZero,
    #[error("cut points must be increasing, positive and end at 1.0: {0:?}")]
    InvalidCutPoints(Vec<f64>),
    #[error("frequency table does not belong to this keyword set")]
    TableMismatch,
    #[error("sample size {n_total} is below the minimum of {minimum}")]
    SampleTooSmall { n_total: usize, minimum: usize },
    #[error("only {available} candidate sentences for a sample of {needed}")]
    TooFewCandidates { needed: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Water,
    Forest,
    Biodiversity,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Water, Dimension::Forest, Dimension::Biodiversity];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Water => "water",
            Dimension::Forest => "forest",
            Dimension::Biodiversity => "biodiversity",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "water" => Ok(Dimension::Water),
            "forest" => Ok(Dimension::Forest),
            "biodiversity" => Ok(Dimension::Biodiversity),
            other => Err(format!(
                "unknown dimension {other:?} (expected water, forest or biodiversity)"
            )),
        }
    }
}

const WATER_V1: &str = include_str!("../resources/keywords/water.v1.txt");
const FOREST_V1: &str = include_str!("../resources/keywords/forest.v1.txt");
const BIODIVERSITY_V1: &str = include_str!("../resources/keywords/biodiversity.v1.txt");

/// Reads a pattern resource: one pattern per line, kept verbatim apart from
/// the line terminator. Blank lines and lines starting with `#` are skipped.
pub fn parse_pattern_lines(text: &str) -> Result<Vec<String>, KeywordError> {
    let mut out: Vec<String> = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            return Err(KeywordError::InvalidResource {
                line: i + 1,
                reason: "pattern is only whitespace".into(),
            });
        }
        if out.iter().any(|p| p == line) {
            return Err(KeywordError::DuplicatePattern(line.to_string()));
        }
        out.push(line.to_string());
    }
    Ok(out)
}

/// Byte span of one keyword occurrence.
///
/// Offsets index the space-padded text (`" " + text + " "`), so a hit on a
/// leading-space pattern at the very start of a sentence begins at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct KeywordHit {
    pub start: usize,
    pub end: usize,
    /// Index into the pattern list of the matcher.
    pub pattern: usize,
}

/// Single-pass multi-pattern matcher over space-padded, ASCII case-folded text.
#[derive(Debug, Clone)]
pub struct Matcher {
    patterns: Vec<String>,
    automaton: AhoCorasick,
}

pub(crate) fn pad(text: &str) -> String {
    let mut padded = String::with_capacity(text.len() + 2);
    padded.push(' ');
    padded.push_str(text);
    padded.push(' ');
    padded
}

impl Matcher {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Self {
        let patterns: Vec<String> = patterns.iter().map(|p| p.as_ref().to_string()).collect();
        let automaton = AhoCorasickBuilder::new()
            .ascii_case_insensitive(true)
            .match_kind(MatchKind::Standard)
            .build(&patterns)
            .expect("keyword automaton construction");
        Matcher {
            patterns,
            automaton,
        }
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    /// All non-overlapping occurrences of every pattern, ordered by start
    /// offset then pattern index. Occurrences of different patterns may
    /// overlap.
    pub fn find(&self, text: &str) -> Vec<KeywordHit> {
        let padded = pad(text);
        let mut last_end = vec![0usize; self.patterns.len()];
        let mut hits = Vec::new();
        for m in self.automaton.find_overlapping_iter(&padded) {
            let p = m.pattern().as_usize();
            // Overlapping search reports matches by end offset; for a single
            // pattern that is also start order, so greedy filtering yields
            // leftmost non-overlapping occurrences.
            if m.start() >= last_end[p] {
                last_end[p] = m.end();
                hits.push(KeywordHit {
                    start: m.start(),
                    end: m.end(),
                    pattern: p,
                });
            }
        }
        hits.sort_unstable();
        hits
    }

    /// Marks in `seen` every pattern occurring in `text`.
    pub fn mark_patterns(&self, text: &str, seen: &mut [bool]) {
        let padded = pad(text);
        for m in self.automaton.find_overlapping_iter(&padded) {
            seen[m.pattern().as_usize()] = true;
        }
    }

    /// Indices of the distinct patterns occurring in `text`, ascending.
    pub fn matched_patterns(&self, text: &str) -> Vec<usize> {
        let mut seen = vec![false; self.patterns.len()];
        self.mark_patterns(text, &mut seen);
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.automaton.is_match(&pad(text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordPattern {
    /// The pattern exactly as listed, including significant spaces.
    pub raw: String,
    pub dimension: Dimension,
}

/// Ordered keyword dictionary of one dimension with its matcher.
#[derive(Debug, Clone)]
pub struct KeywordSet {
    dimension: Dimension,
    patterns: Vec<KeywordPattern>,
    matcher: Matcher,
}

impl KeywordSet {
    pub fn new<S: AsRef<str>>(dimension: Dimension, raw: &[S]) -> Result<Self, KeywordError> {
        if raw.is_empty() {
            return Err(KeywordError::EmptySet);
        }
        let mut patterns: Vec<KeywordPattern> = Vec::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            let r = r.as_ref();
            if r.trim().is_empty() {
                return Err(KeywordError::InvalidResource {
                    line: i + 1,
                    reason: "pattern is only whitespace".into(),
                });
            }
            if patterns.iter().any(|p| p.raw == r) {
                return Err(KeywordError::DuplicatePattern(r.to_string()));
            }
            patterns.push(KeywordPattern {
                raw: r.to_string(),
                dimension,
            });
        }
        let matcher = Matcher::new(raw);
        Ok(KeywordSet {
            dimension,
            patterns,
            matcher,
        })
    }

    /// Parses a keyword resource file.
    pub fn from_resource(dimension: Dimension, text: &str) -> Result<Self, KeywordError> {
        Self::new(dimension, &parse_pattern_lines(text)?)
    }

    /// The bundled v1 dictionary for `dimension`.
    pub fn builtin(dimension: Dimension) -> Self {
        let text = match dimension {
            Dimension::Water => WATER_V1,
            Dimension::Forest => FOREST_V1,
            Dimension::Biodiversity => BIODIVERSITY_V1,
        };
        Self::from_resource(dimension, text).expect("bundled keyword resource")
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn patterns(&self) -> &[KeywordPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn matcher(&self) -> &Matcher {
        &self.matcher
    }

    pub fn raw(&self, index: usize) -> &str {
        &self.patterns[index].raw
    }
}

/// Keyword hits of `set` in a sentence.
pub fn match_sentence(sentence: &Sentence, set: &KeywordSet) -> Vec<KeywordHit> {
    set.matcher.find(&sentence.text)
}

/// Per-pattern counts of sentences containing the pattern at least once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub dimension: Dimension,
    pub patterns: Vec<String>,
    pub counts: Vec<u64>,
    pub total_matched_sentences: u64,
    pub total_sentences: u64,
}

impl FrequencyTable {
    pub fn count_of(&self, raw: &str) -> Option<u64> {
        self.patterns
            .iter()
            .position(|p| p == raw)
            .map(|i| self.counts[i])
    }

    pub fn appearance_rate(&self) -> f64 {
        if self.total_sentences == 0 {
            0.0
        } else {
            self.total_matched_sentences as f64 / self.total_sentences as f64
        }
    }

    /// Counts from a list of sentence texts.
    pub fn from_texts<'a, I>(set: &KeywordSet, texts: I) -> FrequencyTable
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts = vec![0u64; set.len()];
        let mut seen = vec![false; set.len()];
        let mut matched = 0u64;
        let mut total = 0u64;
        for text in texts {
            total += 1;
            seen.iter_mut().for_each(|s| *s = false);
            set.matcher.mark_patterns(text, &mut seen);
            let mut any = false;
            for (c, &s) in counts.iter_mut().zip(&seen) {
                if s {
                    *c += 1;
                    any = true;
                }
            }
            if any {
                matched += 1;
            }
        }
        FrequencyTable {
            dimension: set.dimension,
            patterns: set.patterns.iter().map(|p| p.raw.clone()).collect(),
            counts,
            total_matched_sentences: matched,
            total_sentences: total,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pattern,count,share_of_sentences\n");
        for (p, &c) in self.patterns.iter().zip(&self.counts) {
            let share = if self.total_sentences == 0 {
                0.0
            } else {
                c as f64 / self.total_sentences as f64
            };
            out.push_str(&format!("\"{}\",{c},{share:.6}\n", p.replace('"', "\"\"")));
        }
        out
    }
}

pub fn keyword_frequency_table(
    store: &CorpusStore,
    set: &KeywordSet,
) -> Result<FrequencyTable, KeywordError> {
    if store.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    Ok(FrequencyTable::from_texts(
        set,
        store.sentences().iter().map(|s| s.text.as_str()),
    ))
}

/// Fraction of sentences matching at least one pattern of `set`.
pub fn appearance_rate(store: &CorpusStore, set: &KeywordSet) -> Result<f64, KeywordError> {
    if store.is_empty() {
        return Err(KeywordError::EmptyCorpus);
    }
    let matched = store
        .sentences()
        .iter()
        .filter(|s| set.matcher.is_match(&s.text))
        .count();
    Ok(matched as f64 / store.len() as f64)
}

/// Cumulative-share boundaries of the top 10%, 10-20%, 20-40%, 40-60% and
/// 60-100% keyword buckets.
pub const DEFAULT_CUT_POINTS: [f64; 5] = [0.1, 0.2, 0.4, 0.6, 1.0];

/// Bucket (1-based) of every pattern in a frequency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketAssignment {
    pub patterns: Vec<String>,
    pub buckets: Vec<usize>,
    pub cut_points: Vec<f64>,
}

impl BucketAssignment {
    pub fn bucket_count(&self) -> usize {
        self.cut_points.len()
    }

    pub fn bucket_of(&self, raw: &str) -> Option<usize> {
        self.patterns
            .iter()
            .position(|p| p == raw)
            .map(|i| self.buckets[i])
    }
}

fn validate_cut_points(cut_points: &[f64]) -> Result<(), KeywordError> {
    let increasing = cut_points.windows(2).all(|w| w[0] < w[1]);
    let ok = !cut_points.is_empty()
        && increasing
        && cut_points[0] > 0.0
        && cut_points[cut_points.len() - 1] == 1.0;
    if ok {
        Ok(())
    } else {
        Err(KeywordError::InvalidCutPoints(cut_points.to_vec()))
    }
}

/// Assigns patterns to frequency buckets.
///
/// Patterns are ranked by descending count (ties keep listing order). Walking
/// that ranking, a pattern lands in the first bucket whose cut point is at
/// least the cumulative share of counts reached once the pattern is included.
/// The top-ranked pattern always lands in bucket 1, even when it alone
/// exceeds the first cut point. Zero-count patterns go to the last bucket.
pub fn bucketize(
    table: &FrequencyTable,
    cut_points: &[f64],
) -> Result<BucketAssignment, KeywordError> {
    validate_cut_points(cut_points)?;
    let total: u64 = table.counts.iter().sum();
    if total == 0 {
        return Err(KeywordError::AllZero);
    }
    let last = cut_points.len();
    let mut order: Vec<usize> = (0..table.counts.len()).collect();
    order.sort_by(|&a, &b| table.counts[b].cmp(&table.counts[a]).then(a.cmp(&b)));

    let mut buckets = vec![last; table.counts.len()];
    let mut running = 0u64;
    for (rank, &p) in order.iter().enumerate() {
        let count = table.counts[p];
        if count == 0 {
            break;
        }
        running += count;
        let share = running as f64 / total as f64;
        buckets[p] = if rank == 0 {
            1
        } else {
            cut_points
                .iter()
                .position(|&cut| share <= cut)
                .map_or(last, |i| i + 1)
        };
    }
    Ok(BucketAssignment {
        patterns: table.patterns.clone(),
        buckets,
        cut_points: cut_points.to_vec(),
    })
}

/// Bucket of a sentence: the bucket of its rarest matched pattern, which is
/// the highest bucket index among its hits.
pub fn sentence_bucket(text: &str, set: &KeywordSet, assignment: &BucketAssignment) -> Option<usize> {
    set.matcher
        .matched_patterns(text)
        .into_iter()
        .map(|p| assignment.buckets[p])
        .max()
}

/// Result of [`bucket_balanced_sample`]: sampled sentences grouped by bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketSample {
    /// `per_bucket[b]` holds the sentences drawn from bucket `b + 1`, in corpus
    /// order.
    pub per_bucket: Vec<Vec<Sentence>>,
    /// Number of candidate sentences available per bucket.
    pub available: Vec<usize>,
}

impl BucketSample {
    pub fn sizes(&self) -> Vec<usize> {
        self.per_bucket.iter().map(Vec::len).collect()
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.per_bucket.into_iter().flatten().collect()
    }

    pub fn sentences(&self) -> impl Iterator<Item = (usize, &Sentence)> {
        self.per_bucket
            .iter()
            .enumerate()
            .flat_map(|(b, v)| v.iter().map(move |s| (b + 1, s)))
    }
}

/// Draws `n_total` keyword-matching sentences spread evenly over the buckets.
///
/// Each bucket gets `n_total / buckets` (remainder to the lowest buckets); a
/// bucket with too few candidates hands its shortfall round-robin to the
/// others. Selection is uniform without replacement and fixed by `seed`.
pub fn bucket_balanced_sample(
    store: &CorpusStore,
    set: &KeywordSet,
    assignment: &BucketAssignment,
    n_total: usize,
    seed: u64,
) -> Result<BucketSample, KeywordError> {
    let n_buckets = assignment.bucket_count();
    if assignment.patterns.len() != set.len()
        || assignment
            .patterns
            .iter()
            .zip(set.patterns())
            .any(|(a, p)| *a != p.raw)
    {
        return Err(KeywordError::TableMismatch);
    }
    if n_total < n_buckets {
        return Err(KeywordError::SampleTooSmall {
            n_total,
            minimum: n_buckets,
        });
    }
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); n_buckets];
    for (i, s) in store.sentences().iter().enumerate() {
        if let Some(b) = sentence_bucket(&s.text, set, assignment) {
            candidates[b - 1].push(i);
        }
    }
    let available: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let alloc = sampling::allocate_round_robin(n_total, &available).ok_or(
        KeywordError::TooFewCandidates {
            needed: n_total,
            available: available.iter().sum(),
        },
    )?;
    let mut rng = sampling::rng(seed);
    let per_bucket = candidates
        .iter()
        .zip(&alloc)
        .map(|(cands, &k)| {
            sampling::sample_positions(&mut rng, cands.len(), k)
                .into_iter()
                .map(|pos| store.sentences()[cands[pos]].clone())
                .collect()
        })
        .collect();
    Ok(BucketSample {
        per_bucket,
        available,
    })
}

/// Uniformly samples up to `per_source_cap` keyword-matching sentences from
/// each source kind. Output is grouped by source kind (AR, SR, EC), corpus
/// order within a group.
pub fn keyword_filter_sample(
    store: &CorpusStore,
    set: &KeywordSet,
    per_source_cap: usize,
    seed: u64,
) -> Vec<Sentence> {
    let mut rng = sampling::rng(seed);
    let mut out = Vec::new();
    for kind in SourceKind::ALL {
        let matching: Vec<&Sentence> = store
            .iter_with_source()
            .filter(|(s, k)| *k == kind && set.matcher.is_match(&s.text))
            .map(|(s, _)| s)
            .collect();
        for pos in sampling::sample_positions(&mut rng, matching.len(), per_source_cap) {
            out.push(matching[pos].clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use std::collections::BTreeMap;

    fn table(counts: &[u64]) -> FrequencyTable {
        FrequencyTable {
            dimension: Dimension::Biodiversity,
            patterns: (0..counts.len()).map(|i| format!("p{i}")).collect(),
            counts: counts.to_vec(),
            total_matched_sentences: 0,
            total_sentences: counts.iter().sum(),
        }
    }

    fn hits_of(set: &KeywordSet, text: &str) -> Vec<String> {
        set.matcher()
            .find(text)
            .into_iter()
            .map(|h| set.raw(h.pattern).to_string())
            .collect()
    }

    #[test]
    fn builtin_sets_have_listed_sizes() {
        assert_eq!(KeywordSet::builtin(Dimension::Water).len(), 40);
        assert_eq!(KeywordSet::builtin(Dimension::Forest).len(), 27);
        assert_eq!(KeywordSet::builtin(Dimension::Biodiversity).len(), 51);
        let forest = KeywordSet::builtin(Dimension::Forest);
        assert_eq!(forest.raw(1), "wood ");
        assert_eq!(forest.raw(5), " tree");
    }

    #[test]
    fn stem_matches_inflection() {
        let bio = KeywordSet::builtin(Dimension::Biodiversity);
        assert!(hits_of(&bio, "Our environmental policy improved.").contains(&"environ".to_string()));
    }

    #[test]
    fn forest_soy_has_no_trailing_space() {
        let forest = KeywordSet::builtin(Dimension::Forest);
        assert!(hits_of(&forest, "We soylent nothing.").contains(&"soy".to_string()));
    }

    #[test]
    fn trailing_space_is_significant() {
        let bio = KeywordSet::builtin(Dimension::Biodiversity);
        assert!(!hits_of(&bio, "We hunted.").contains(&"hunt ".to_string()));
        assert!(hits_of(&bio, "We hunt today.").contains(&"hunt ".to_string()));
        // End of sentence counts as a space thanks to padding.
        assert!(hits_of(&bio, "We hunt").contains(&"hunt ".to_string()));
    }

    #[test]
    fn leading_space_is_significant() {
        let water = KeywordSet::builtin(Dimension::Water);
        assert!(!hits_of(&water, "Flake output rose.").contains(&" lake".to_string()));
        assert!(hits_of(&water, "Lake levels fell.").contains(&" lake".to_string()));
    }

    #[test]
    fn case_insensitive() {
        let water = KeywordSet::builtin(Dimension::Water);
        assert!(hits_of(&water, "the el nino season").contains(&"El Nino".to_string()));
    }

    #[test]
    fn non_overlapping_per_pattern() {
        let m = Matcher::new(&["aa"]);
        assert_eq!(m.find("aaaa").len(), 2);
        assert_eq!(m.find("aaa").len(), 1);
    }

    #[test]
    fn resource_parsing_keeps_spaces() {
        let pats = parse_pattern_lines("# c\n lake\nsoy \r\n\nwater\n").unwrap();
        assert_eq!(pats, vec![" lake", "soy ", "water"]);
        assert!(matches!(
            parse_pattern_lines("a\na\n"),
            Err(KeywordError::DuplicatePattern(_))
        ));
        assert!(parse_pattern_lines("  \n").is_err());
    }

    #[test]
    fn bucketize_dominant_keyword() {
        // Hand walk: shares 0.90, 0.95, 1.00. The top pattern is forced into
        // bucket 1; the others complete above 0.6 and fall into bucket 5.
        let a = bucketize(&table(&[90, 5, 5]), &DEFAULT_CUT_POINTS).unwrap();
        assert_eq!(a.buckets, vec![1, 5, 5]);
    }

    #[test]
    fn bucketize_uniform() {
        let a = bucketize(&table(&[3; 10]), &DEFAULT_CUT_POINTS).unwrap();
        assert_eq!(a.buckets, vec![1, 2, 3, 3, 4, 4, 5, 5, 5, 5]);
    }

    #[test]
    fn bucketize_zero_and_ties() {
        let a = bucketize(&table(&[0, 10, 10, 80]), &DEFAULT_CUT_POINTS).unwrap();
        // Order: p3 (0.8, forced 1), p1 (0.9 -> 5), p2 (1.0 -> 5), p0 zero -> 5.
        assert_eq!(a.buckets, vec![5, 5, 5, 1]);
        assert_eq!(
            bucketize(&table(&[0, 0]), &DEFAULT_CUT_POINTS),
            Err(KeywordError::AllZero)
        );
        assert!(bucketize(&table(&[1]), &[0.5, 0.4, 1.0]).is_err());
    }

    fn store(texts: &[(&str, SourceKind)]) -> CorpusStore {
        let mut st = CorpusStore::new();
        for (i, (t, k)) in texts.iter().enumerate() {
            st.add_document(Document {
                doc_id: format!("d{i}"),
                source_kind: *k,
                text: t.to_string(),
                meta: BTreeMap::new(),
            })
            .unwrap();
        }
        st
    }

    #[test]
    fn frequency_counts_distinct_sentences() {
        let set = KeywordSet::new(Dimension::Water, &["water"]).unwrap();
        let st = store(&[
            ("water and water", SourceKind::AnnualReport),
            ("Water again", SourceKind::AnnualReport),
            ("nothing", SourceKind::AnnualReport),
        ]);
        let t = keyword_frequency_table(&st, &set).unwrap();
        assert_eq!(t.count_of("water"), Some(2));
        assert_eq!(t.total_matched_sentences, 2);
        assert_eq!(t.total_sentences, 3);
        assert!(keyword_frequency_table(&CorpusStore::new(), &set).is_err());
    }

    #[test]
    fn appearance_rate_ratio() {
        let set = KeywordSet::new(Dimension::Water, &["water"]).unwrap();
        let mut texts = vec![("dry", SourceKind::AnnualReport); 9];
        texts.push(("water", SourceKind::AnnualReport));
        let st = store(&texts);
        assert_eq!(appearance_rate(&st, &set).unwrap(), 0.1);
    }

    #[test]
    fn filter_sample_caps_and_scarcity() {
        let set = KeywordSet::new(Dimension::Water, &["water"]).unwrap();
        let mut texts = vec![("water", SourceKind::AnnualReport); 5];
        texts.extend(vec![("water", SourceKind::EarningsCall); 3]);
        texts.push(("dry", SourceKind::EarningsCall));
        let st = store(&texts);
        let s = keyword_filter_sample(&st, &set, 2, 7);
        assert_eq!(s.len(), 4);
        let s = keyword_filter_sample(&st, &set, 10, 7);
        assert_eq!(s.len(), 8);
        assert_eq!(
            keyword_filter_sample(&st, &set, 2, 7),
            keyword_filter_sample(&st, &set, 2, 7)
        );
    }
}
