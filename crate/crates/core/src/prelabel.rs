//! LLM pre-labeling: prompt rendering, response parsing, batch scoring with a
//! pluggable backend, and score-band balanced sampling.
//!
//! A backend receives the rendered prompt and returns the raw answer text.
//! Answers look like `"Yes, 85"`; a `"No"` verdict always yields an effective
//! score of 0 whatever confidence follows it. Effective scores fall in three
//! bands: 0, 1..=74 and 75..=100.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::keywords::{Dimension, KeywordSet};
use crate::sampling;

const PROMPT_HEAD: &str = "In the following you will be provided with a guideline enclosed in <> and a text enclosed in ||.
Your task is to label the text with the guideline. Read the text and assign a \"Yes\" if the text adheres to the guideline, \"No\" otherwise.

Please stricly follow the following answer format: answer with \"Yes\" or \"No\" and then provide a number between 0-100 of how sure you are (100 signaling very sure).

Provided guideline: <";
const PROMPT_MID: &str = ">

Provided text: |";
const PROMPT_TAIL: &str = "|";

/// The prompt template with `{guideline}` and `{text}` placeholders.
pub fn prompt_template() -> String {
    format!("{PROMPT_HEAD}{{guideline}}{PROMPT_MID}{{text}}{PROMPT_TAIL}")
}

#[derive(Debug, Error, PartialEq)]
pub enum PrelabelError {
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("sample size {0} is below the minimum of 3")]
    SampleTooSmall(usize),
    #[error("only {available} scored sentences for a sample of {needed}")]
    TooFewScores { needed: usize, available: usize },
    #[error("score store {path}: {reason}")]
    Store { path: PathBuf, reason: String },
}

/// Substitutes guideline and text into the template. Both are inserted
/// verbatim; a `|` inside `text` is not escaped.
pub fn render_prompt(guideline: &str, text: &str) -> Result<String, PrelabelError> {
    if guideline.is_empty() {
        return Err(PrelabelError::EmptyInput("guideline"));
    }
    if text.is_empty() {
        return Err(PrelabelError::EmptyInput("text"));
    }
    Ok(format!("{PROMPT_HEAD}{guideline}{PROMPT_MID}{text}{PROMPT_TAIL}"))
}

/// Recovers the text from a rendered prompt.
pub fn prompt_text(prompt: &str) -> Option<&str> {
    let start = prompt.find(PROMPT_MID)? + PROMPT_MID.len();
    prompt[start..].strip_suffix(PROMPT_TAIL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse response {raw:?}: {reason}")]
pub struct ParseError {
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedResponse {
    pub verdict: Verdict,
    pub confidence: u8,
}

impl ParsedResponse {
    pub fn effective_score(&self) -> u8 {
        match self.verdict {
            Verdict::Yes => self.confidence,
            Verdict::No => 0,
        }
    }
}

/// Finds the first `yes`/`no` word (any case) and the first integer after it.
pub fn parse_response(raw: &str) -> Result<ParsedResponse, ParseError> {
    let err = |reason: &str| ParseError {
        raw: raw.to_string(),
        reason: reason.to_string(),
    };
    let bytes = raw.as_bytes();
    let mut verdict = None;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            match raw[start..i].to_ascii_lowercase().as_str() {
                "yes" => verdict = Some(Verdict::Yes),
                "no" => verdict = Some(Verdict::No),
                _ => continue,
            }
            break;
        }
        i += 1;
    }
    let verdict = verdict.ok_or_else(|| err("no Yes/No verdict"))?;

    while i < bytes.len() && !bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == bytes.len() {
        return Err(err("no confidence number after the verdict"));
    }
    let negative = i > 0 && bytes[i - 1] == b'-';
    let start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let value: u64 = raw[start..i]
        .parse()
        .map_err(|_| err("confidence is not a number"))?;
    if negative || value > 100 {
        return Err(err("confidence outside 0-100"));
    }
    Ok(ParsedResponse {
        verdict,
        confidence: value as u8,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreLabelScore {
    pub sent_id: String,
    pub dimension: Dimension,
    pub verdict: Verdict,
    pub confidence: u8,
    pub effective_score: u8,
    /// SHA-256 of the sentence text, the cache key together with `dimension`.
    #[serde(default)]
    pub text_sha256: String,
}

impl PreLabelScore {
    pub fn new(sent_id: &str, dimension: Dimension, parsed: ParsedResponse, text: &str) -> Self {
        PreLabelScore {
            sent_id: sent_id.to_string(),
            dimension,
            verdict: parsed.verdict,
            confidence: parsed.confidence,
            effective_score: parsed.effective_score(),
            text_sha256: text_hash(text),
        }
    }

    pub fn band(&self) -> ScoreBand {
        ScoreBand::of(self.effective_score)
    }
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreBand {
    Zero,
    LowMid,
    High,
}

impl ScoreBand {
    pub const ALL: [ScoreBand; 3] = [ScoreBand::Zero, ScoreBand::LowMid, ScoreBand::High];

    pub fn of(score: u8) -> ScoreBand {
        match score {
            0 => ScoreBand::Zero,
            1..=74 => ScoreBand::LowMid,
            _ => ScoreBand::High,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned status {status}")]
    Status { status: u16 },
    #[error("backend response malformed: {0}")]
    Malformed(String),
}

/// Turns a rendered prompt into a raw answer.
pub trait ScorerBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

impl<F> ScorerBackend for F
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self(prompt)
    }
}

/// Offline backend: answers from keyword presence in the prompt text.
///
/// No keyword of the set gives `"No, 90"`; otherwise `"Yes, s"` with
/// `s = min(100, 40 + 20 * distinct_patterns)`.
#[derive(Debug, Clone)]
pub struct MockBackend {
    keywords: KeywordSet,
}

impl MockBackend {
    pub fn new(keywords: KeywordSet) -> Self {
        MockBackend { keywords }
    }
}

impl ScorerBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let text = prompt_text(prompt)
            .ok_or_else(|| BackendError::Malformed("prompt has no text section".into()))?;
        let hits = self.keywords.matcher().matched_patterns(text).len();
        Ok(if hits == 0 {
            "No, 90".to_string()
        } else {
            format!("Yes, {}", (40 + 20 * hits).min(100))
        })
    }
}

/// Settings of the HTTP-JSON backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            token_env: "NATURE_LLM_TOKEN".into(),
            timeout_secs: 60,
        }
    }
}

/// Posts `{"model", "messages": [{"role": "user", "content": prompt}],
/// "temperature": 0}` and reads the answer from `choices[0].message.content`,
/// `choices[0].text`, `response` or `text`.
pub struct HttpBackend {
    config: HttpBackendConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let token = std::env::var(&config.token_env).ok();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            config,
            token,
            agent,
        }
    }
}

/// Pulls the answer text out of a chat- or completion-style JSON body.
pub fn extract_answer(body: &serde_json::Value) -> Option<String> {
    let choice = body.get("choices").and_then(|c| c.get(0));
    choice
        .and_then(|c| c.pointer("/message/content"))
        .or_else(|| choice.and_then(|c| c.get("text")))
        .or_else(|| body.get("response"))
        .or_else(|| body.get("text"))
        .and_then(|v| v.as_str())
        .map(str::to_string)
}

impl ScorerBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| BackendError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status });
        }
        let json: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        extract_answer(&json).ok_or_else(|| BackendError::Malformed(json.to_string()))
    }
}

/// Append-only jsonl store of scores; one writer at a time.
#[derive(Debug)]
pub struct ScoreStore {
    path: PathBuf,
    scores: Vec<PreLabelScore>,
    by_sent: HashMap<(Dimension, String), usize>,
    by_hash: HashMap<(Dimension, String), usize>,
}

impl ScoreStore {
    /// Opens (or starts) a store, loading previously committed scores.
    pub fn open(path: &Path) -> Result<ScoreStore, PrelabelError> {
        let mut store = ScoreStore {
            path: path.to_path_buf(),
            scores: Vec::new(),
            by_sent: HashMap::new(),
            by_hash: HashMap::new(),
        };
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| store.err(e.to_string()))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let score: PreLabelScore = serde_json::from_str(line)
                    .map_err(|e| store.err(format!("line {}: {e}", i + 1)))?;
                store.index(score);
            }
        }
        Ok(store)
    }

    fn err(&self, reason: String) -> PrelabelError {
        PrelabelError::Store {
            path: self.path.clone(),
            reason,
        }
    }

    fn index(&mut self, score: PreLabelScore) {
        let i = self.scores.len();
        self.by_sent
            .insert((score.dimension, score.sent_id.clone()), i);
        if !score.text_sha256.is_empty() {
            self.by_hash
                .entry((score.dimension, score.text_sha256.clone()))
                .or_insert(i);
        }
        self.scores.push(score);
    }

    /// Appends one score to disk and to the in-memory index.
    pub fn commit(&mut self, score: PreLabelScore) -> Result<(), PrelabelError> {
        let line = serde_json::to_string(&score).expect("serializable score");
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.err(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| self.err(e.to_string()))?;
        self.index(score);
        Ok(())
    }

    pub fn scores(&self) -> &[PreLabelScore] {
        &self.scores
    }

    pub fn get(&self, dimension: Dimension, sent_id: &str) -> Option<&PreLabelScore> {
        self.by_sent
            .get(&(dimension, sent_id.to_string()))
            .map(|&i| &self.scores[i])
    }

    pub fn cached(&self, dimension: Dimension, hash: &str) -> Option<&PreLabelScore> {
        self.by_hash
            .get(&(dimension, hash.to_string()))
            .map(|&i| &self.scores[i])
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub budget: usize,
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled for each further attempt.
    pub backoff: Duration,
    pub parallelism: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            budget: 5000,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub sent_id: String,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BatchOutcome {
    /// Scores of the selected sentences in input order, including ones
    /// recovered from the store.
    pub scores: Vec<PreLabelScore>,
    pub failures: Vec<FailureEntry>,
    /// Number of sentences sent to the backend in this run.
    pub queried: usize,
}

fn call_with_retry(
    backend: &dyn ScorerBackend,
    prompt: &str,
    options: &BatchOptions,
) -> (Result<String, BackendError>, u32) {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(prompt) {
            Ok(r) => return (Ok(r), attempt),
            Err(e) if attempt >= options.max_attempts.max(1) => return (Err(e), attempt),
            Err(_) => {
                let delay = options.backoff * 2u32.saturating_pow(attempt - 1);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
        }
    }
}

/// Scores the first `options.budget` sentences.
///
/// Sentences already in `store` (by id, or by identical text for the same
/// dimension) are not sent again. New scores are committed to the store as
/// they arrive. Per-sentence failures end up in the failure manifest.
pub fn prelabel_batch(
    sentences: &[Sentence],
    dimension: Dimension,
    guideline: &str,
    backend: &dyn ScorerBackend,
    options: &BatchOptions,
    mut store: Option<&mut ScoreStore>,
) -> Result<BatchOutcome, PrelabelError> {
    if options.budget == 0 {
        return Err(PrelabelError::ZeroBudget);
    }
    if guideline.is_empty() {
        return Err(PrelabelError::EmptyInput("guideline"));
    }
    let selected = &sentences[..sentences.len().min(options.budget)];
    let mut results: Vec<Option<PreLabelScore>> = vec![None; selected.len()];
    let mut pending: Vec<usize> = Vec::new();
    let mut in_flight_hashes: HashSet<String> = HashSet::new();
    let mut duplicates: Vec<(usize, String)> = Vec::new();

    for (i, s) in selected.iter().enumerate() {
        let hash = text_hash(&s.text);
        let known = store.as_deref().and_then(|st| {
            st.get(dimension, &s.sent_id)
                .or_else(|| st.cached(dimension, &hash))
                .cloned()
        });
        match known {
            Some(mut score) => {
                score.sent_id = s.sent_id.clone();
                results[i] = Some(score);
            }
            None if !in_flight_hashes.insert(hash.clone()) => duplicates.push((i, hash)),
            None => pending.push(i),
        }
    }

    let mut failures = Vec::new();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<PreLabelScore, FailureEntry>)>();
    let workers = options.parallelism.max(1).min(pending.len().max(1));

    std::thread::scope(|scope| -> Result<(), PrelabelError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(slot) else { break };
                let s = &selected[i];
                let outcome = match render_prompt(guideline, &s.text) {
                    Err(e) => Err(FailureEntry {
                        sent_id: s.sent_id.clone(),
                        attempts: 0,
                        error: e.to_string(),
                    }),
                    Ok(prompt) => match call_with_retry(backend, &prompt, options) {
                        (Ok(raw), _) => parse_response(&raw)
                            .map(|p| PreLabelScore::new(&s.sent_id, dimension, p, &s.text))
                            .map_err(|e| FailureEntry {
                                sent_id: s.sent_id.clone(),
                                attempts: 1,
                                error: e.to_string(),
                            }),
                        (Err(e), attempts) => Err(FailureEntry {
                            sent_id: s.sent_id.clone(),
                            attempts,
                            error: e.to_string(),
                        }),
                    },
                };
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, outcome) in rx {
            match outcome {
                Ok(score) => {
                    if let Some(st) = store.as_deref_mut() {
                        st.commit(score.clone())?;
                    }
                    results[i] = Some(score);
                }
                Err(f) => failures.push((i, f)),
            }
        }
        Ok(())
    })?;

    // Same text seen twice in one batch: reuse the first answer.
    for (i, hash) in duplicates {
        let first = results
            .iter()
            .flatten()
            .find(|s| s.text_sha256 == hash)
            .cloned();
        match first {
            Some(mut score) => {
                score.sent_id = selected[i].sent_id.clone();
                if let Some(st) = store.as_deref_mut() {
                    st.commit(score.clone())?;
                }
                results[i] = Some(score);
            }
            None => failures.push((
                i,
                FailureEntry {
                    sent_id: selected[i].sent_id.clone(),
                    attempts: 0,
                    error: "identical text failed earlier in this batch".into(),
                },
            )),
        }
    }
    failures.sort_by_key(|(i, _)| *i);

    Ok(BatchOutcome {
        scores: results.into_iter().flatten().collect(),
        failures: failures.into_iter().map(|(_, f)| f).collect(),
        queried: pending.len(),
    })
}

/// Draws `n_total` sentence ids evenly from the Zero, LowMid and High bands.
///
/// Each band gets `n_total / 3` (remainder to Zero, then LowMid); a band with
/// too few scores hands its shortfall round-robin to the others. Selection is
/// uniform without replacement and fixed by `seed`.
pub fn band_balanced_sample(
    scores: &[PreLabelScore],
    n_total: usize,
    seed: u64,
) -> Result<Vec<String>, PrelabelError> {
    if n_total < 3 {
        return Err(PrelabelError::SampleTooSmall(n_total));
    }
    let bands: Vec<Vec<&PreLabelScore>> = ScoreBand::ALL
        .iter()
        .map(|b| scores.iter().filter(|s| s.band() == *b).collect())
        .collect();
    let available: Vec<usize> = bands.iter().map(Vec::len).collect();
    let alloc = sampling::allocate_round_robin(n_total, &available).ok_or(
        PrelabelError::TooFewScores {
            needed: n_total,
            available: scores.len(),
        },
    )?;
    let mut rng = sampling::rng(seed);
    let mut out = Vec::with_capacity(n_total);
    for (band, &k) in bands.iter().zip(&alloc) {
        for pos in sampling::sample_positions(&mut rng, band.len(), k) {
            out.push(band[pos].sent_id.clone());
        }
    }
    Ok(out)
}
