//! Annotation storage, label aggregation, agreement statistics and the HTTP
//! API used by the annotation UI.
//!
//! Four registered annotators label every sample on the three dimensions.
//! Per dimension, 3 or 4 equal votes decide the gold value; a 2–2 split goes
//! to an adjudication queue and waits for a human resolution. Gold export is
//! refused while any sample is incomplete or pending.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, GoldDataset, GoldRecord};
use crate::guidelines::Guidelines;
use crate::keywords::Dimension;

/// Number of annotators per sample.
pub const ANNOTATORS: usize = 4;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown sample {0:?}")]
    UnknownSample(String),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("label {field}={value} is not binary")]
    NonBinary { field: &'static str, value: u8 },
    #[error("sample {sample_id:?} has {have} of {ANNOTATORS} annotations")]
    Incomplete { sample_id: String, have: usize },
    #[error("sample {sample_id:?} is not pending adjudication on {dimension}")]
    NotPending {
        sample_id: String,
        dimension: Dimension,
    },
    #[error("expected exactly {ANNOTATORS} annotators, got {0}")]
    AnnotatorCount(usize),
    #[error("duplicate {kind} {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("agreement needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("item {item} has {got} ratings, expected {expected}")]
    RaggedRatings {
        item: usize,
        got: usize,
        expected: usize,
    },
    #[error("export blocked by {} unresolved samples", .0.len())]
    ExportBlocked(Vec<Blocker>),
    #[error("annotation log {path}: {reason}")]
    Log { path: PathBuf, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub annotator_id: String,
    pub water: u8,
    pub forest: u8,
    pub biodiversity: u8,
    /// Unix milliseconds; the server fills it in when absent.
    #[serde(default)]
    pub timestamp: u64,
}

impl AnnotationRecord {
    pub fn new(sample_id: &str, annotator_id: &str, water: u8, forest: u8, biodiversity: u8) -> Self {
        AnnotationRecord {
            sample_id: sample_id.into(),
            annotator_id: annotator_id.into(),
            water,
            forest,
            biodiversity,
            timestamp: 0,
        }
    }

    pub fn label(&self, dimension: Dimension) -> u8 {
        match dimension {
            Dimension::Water => self.water,
            Dimension::Forest => self.forest,
            Dimension::Biodiversity => self.biodiversity,
        }
    }

    fn validate(&self) -> Result<(), AnnotationError> {
        for (field, value) in [
            ("water", self.water),
            ("forest", self.forest),
            ("biodiversity", self.biodiversity),
        ] {
            if value > 1 {
                return Err(AnnotationError::NonBinary { field, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Zero,
    One,
    NeedsAdjudication,
}

/// Majority of the votes; an exact tie needs a human decision.
pub fn aggregate_votes(votes: &[u8]) -> Outcome {
    let ones = votes.iter().filter(|&&v| v == 1).count();
    match (2 * ones).cmp(&votes.len()) {
        std::cmp::Ordering::Greater => Outcome::One,
        std::cmp::Ordering::Less => Outcome::Zero,
        std::cmp::Ordering::Equal => Outcome::NeedsAdjudication,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub water: Outcome,
    pub forest: Outcome,
    pub biodiversity: Outcome,
}

impl Aggregate {
    pub fn get(&self, dimension: Dimension) -> Outcome {
        match dimension {
            Dimension::Water => self.water,
            Dimension::Forest => self.forest,
            Dimension::Biodiversity => self.biodiversity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Unanimous,
    Majority,
    Adjudicated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSample {
    pub sample_id: String,
    pub text: String,
    pub water: u8,
    pub forest: u8,
    pub biodiversity: u8,
    pub nature: u8,
    pub resolution: Resolution,
}

impl GoldSample {
    pub fn to_record(&self) -> GoldRecord {
        GoldRecord::new(
            &self.sample_id,
            &self.text,
            self.water,
            self.forest,
            self.biodiversity,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub sample_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingAdjudication {
    pub sample_id: String,
    pub text: String,
    pub dimension: Dimension,
    /// annotator id → vote
    pub votes: BTreeMap<String, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRequest {
    pub dimension: Dimension,
    pub value: u8,
    pub resolver_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub sample_id: String,
    pub dimension: Dimension,
    pub value: u8,
    pub resolver_id: String,
    /// Votes at resolution time; audit only, not used on replay.
    #[serde(default)]
    pub votes: BTreeMap<String, u8>,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Blocker {
    Incomplete { sample_id: String, missing: Vec<String> },
    PendingAdjudication { sample_id: String, dimension: Dimension },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogEvent {
    Annotation(AnnotationRecord),
    Resolution(AuditEntry),
}

/// Fleiss' kappa, or `Undefined` when chance agreement is 1 (every rating
/// fell in one category).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Kappa {
    Defined(f64),
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Defined(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

fn check_table(table: &[Vec<usize>]) -> Result<usize, AnnotationError> {
    if table.len() < 2 {
        return Err(AnnotationError::TooFewItems(table.len()));
    }
    let n: usize = table[0].iter().sum();
    for (item, row) in table.iter().enumerate() {
        let got: usize = row.iter().sum();
        if got != n || got < 2 || row.len() != table[0].len() {
            return Err(AnnotationError::RaggedRatings {
                item,
                got,
                expected: n.max(2),
            });
        }
    }
    Ok(n)
}

/// Fleiss' kappa over a table of per-item category counts.
///
/// Every row must have the same number of ratings `n ≥ 2`, and there must be
/// at least two items.
pub fn fleiss_kappa_table(table: &[Vec<usize>]) -> Result<Kappa, AnnotationError> {
    let n = check_table(table)? as f64;
    let items = table.len() as f64;
    let categories = table[0].len();
    let p_bar = table
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..categories)
        .map(|j| {
            let p = table.iter().map(|r| r[j] as f64).sum::<f64>() / (items * n);
            p * p
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(Kappa::Undefined);
    }
    Ok(Kappa::Defined((p_bar - p_e) / (1.0 - p_e)))
}

/// Share of items whose largest vote group has 2, 3 or 4 members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementBreakdown {
    pub agree_2of4: f64,
    pub agree_3of4: f64,
    pub agree_4of4: f64,
}

pub fn agreement_breakdown_table(table: &[Vec<usize>]) -> Result<AgreementBreakdown, AnnotationError> {
    let n = check_table(table)?;
    if n != ANNOTATORS {
        return Err(AnnotationError::RaggedRatings {
            item: 0,
            got: n,
            expected: ANNOTATORS,
        });
    }
    let mut counts = [0usize; 3];
    for row in table {
        let m = *row.iter().max().expect("non-empty row");
        counts[m - 2] += 1;
    }
    let total = table.len() as f64;
    Ok(AgreementBreakdown {
        agree_2of4: counts[0] as f64 / total,
        agree_3of4: counts[1] as f64 / total,
        agree_4of4: counts[2] as f64 / total,
    })
}

/// `[zeros, ones]` per sample, in sample id order.
pub fn vote_table(
    records: &[AnnotationRecord],
    dimension: Dimension,
) -> Result<Vec<Vec<usize>>, AnnotationError> {
    let mut by_sample: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        let row = by_sample.entry(&r.sample_id).or_insert_with(|| vec![0, 0]);
        row[usize::from(r.label(dimension))] += 1;
    }
    for (sample_id, row) in &by_sample {
        let have = row[0] + row[1];
        if have != ANNOTATORS {
            return Err(AnnotationError::Incomplete {
                sample_id: sample_id.to_string(),
                have,
            });
        }
    }
    Ok(by_sample.into_values().collect())
}

/// Fleiss' kappa of one dimension; every sample needs exactly four records.
pub fn fleiss_kappa(records: &[AnnotationRecord], dimension: Dimension) -> Result<Kappa, AnnotationError> {
    fleiss_kappa_table(&vote_table(records, dimension)?)
}

pub fn agreement_breakdown(
    records: &[AnnotationRecord],
    dimension: Dimension,
) -> Result<AgreementBreakdown, AnnotationError> {
    agreement_breakdown_table(&vote_table(records, dimension)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAgreement {
    pub kappa: Kappa,
    #[serde(flatten)]
    pub breakdown: AgreementBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub samples: usize,
    pub dimensions: BTreeMap<Dimension, DimensionAgreement>,
}

pub fn agreement_report(records: &[AnnotationRecord]) -> Result<AgreementReport, AnnotationError> {
    let mut dimensions = BTreeMap::new();
    let mut samples = 0;
    for d in Dimension::ALL {
        let table = vote_table(records, d)?;
        samples = table.len();
        dimensions.insert(
            d,
            DimensionAgreement {
                kappa: fleiss_kappa_table(&table)?,
                breakdown: agreement_breakdown_table(&table)?,
            },
        );
    }
    Ok(AgreementReport { samples, dimensions })
}

/// Positive counts per dimension and counts per label combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub total: usize,
    pub water: usize,
    pub forest: usize,
    pub biodiversity: usize,
    pub nature: usize,
    /// Keys like `"water+forest"`; `"none"` for all-negative rows.
    pub combinations: BTreeMap<String, usize>,
}

impl LabelDistribution {
    pub fn of(records: &[GoldRecord]) -> Self {
        let mut d = LabelDistribution {
            total: records.len(),
            water: 0,
            forest: 0,
            biodiversity: 0,
            nature: 0,
            combinations: BTreeMap::new(),
        };
        for r in records {
            d.water += usize::from(r.water);
            d.forest += usize::from(r.forest);
            d.biodiversity += usize::from(r.biodiversity);
            d.nature += usize::from(r.nature);
            let names: Vec<&str> = [
                ("water", r.water),
                ("forest", r.forest),
                ("biodiversity", r.biodiversity),
            ]
            .into_iter()
            .filter(|(_, v)| *v == 1)
            .map(|(n, _)| n)
            .collect();
            let key = if names.is_empty() {
                "none".to_string()
            } else {
                names.join("+")
            };
            *d.combinations.entry(key).or_default() += 1;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldExport {
    pub samples: Vec<GoldSample>,
    pub distribution: LabelDistribution,
}

impl GoldExport {
    pub fn dataset(&self) -> GoldDataset {
        GoldDataset::from_records(self.samples.iter().map(GoldSample::to_record).collect())
    }

    /// Writes `gold.csv`, `gold.jsonl` and `distribution.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, AnnotationError> {
        let io = |path: &Path, e: std::io::Error| {
            AnnotationError::Dataset(DatasetError::Io {
                path: path.to_path_buf(),
                source: e,
            })
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let ds = self.dataset();
        let csv = dir.join("gold.csv");
        let jsonl = dir.join("gold.jsonl");
        let dist = dir.join("distribution.json");
        ds.write(&csv)?;
        ds.write(&jsonl)?;
        let body = serde_json::to_string_pretty(&self.distribution).expect("serializable");
        fs::write(&dist, body).map_err(|e| io(&dist, e))?;
        Ok(vec![csv, jsonl, dist])
    }
}

#[derive(Debug, Default)]
struct Inner {
    records: HashMap<(String, String), AnnotationRecord>,
    /// sample → dimension → resolution entry
    resolutions: HashMap<String, BTreeMap<Dimension, AuditEntry>>,
    audit: Vec<AuditEntry>,
}

/// Thread-safe store of tasks, annotations and adjudications.
///
/// Reads run concurrently; writes are serialized and, when a log path is
/// set, appended to a jsonl event log that [`AnnotationStore::open`] replays.
#[derive(Debug)]
pub struct AnnotationStore {
    tasks: Vec<Task>,
    task_index: HashMap<String, usize>,
    annotators: Vec<String>,
    log: Option<PathBuf>,
    inner: RwLock<Inner>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgement {
    pub sample_id: String,
    pub annotator_id: String,
    pub timestamp: u64,
    /// Annotations now present for the sample.
    pub annotations: usize,
    /// Dimensions of this sample that are waiting for adjudication.
    pub pending: Vec<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total_tasks: usize,
    pub per_annotator: BTreeMap<String, usize>,
    pub complete_samples: usize,
    pub pending_adjudications: usize,
}

impl AnnotationStore {
    pub fn new<S: AsRef<str>>(tasks: Vec<Task>, annotators: &[S]) -> Result<Self, AnnotationError> {
        if annotators.len() != ANNOTATORS {
            return Err(AnnotationError::AnnotatorCount(annotators.len()));
        }
        let mut names: Vec<String> = Vec::new();
        for a in annotators {
            let a = a.as_ref().to_string();
            if names.contains(&a) {
                return Err(AnnotationError::Duplicate {
                    kind: "annotator",
                    id: a,
                });
            }
            names.push(a);
        }
        let mut task_index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if task_index.insert(t.sample_id.clone(), i).is_some() {
                return Err(AnnotationError::Duplicate {
                    kind: "sample",
                    id: t.sample_id.clone(),
                });
            }
        }
        Ok(AnnotationStore {
            tasks,
            task_index,
            annotators: names,
            log: None,
            inner: RwLock::new(Inner::default()),
        })
    }

    /// Like [`AnnotationStore::new`], persisting every write to `log` and
    /// replaying any events already in it.
    pub fn open<S: AsRef<str>>(
        tasks: Vec<Task>,
        annotators: &[S],
        log: &Path,
    ) -> Result<Self, AnnotationError> {
        let mut store = Self::new(tasks, annotators)?;
        if log.exists() {
            let err = |reason: String| AnnotationError::Log {
                path: log.to_path_buf(),
                reason,
            };
            let text = fs::read_to_string(log).map_err(|e| err(e.to_string()))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let event: LogEvent =
                    serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                match event {
                    LogEvent::Annotation(r) => {
                        store.submit_annotation(r)?;
                    }
                    LogEvent::Resolution(a) => {
                        store.apply_resolution(a)?;
                    }
                }
            }
        }
        store.log = Some(log.to_path_buf());
        Ok(store)
    }

    fn append(&self, event: &LogEvent) -> Result<(), AnnotationError> {
        let Some(path) = &self.log else { return Ok(()) };
        let err = |e: std::io::Error| AnnotationError::Log {
            path: path.clone(),
            reason: e.to_string(),
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(err)?;
        writeln!(f, "{}", serde_json::to_string(event).expect("serializable")).map_err(err)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    fn task(&self, sample_id: &str) -> Result<&Task, AnnotationError> {
        self.task_index
            .get(sample_id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| AnnotationError::UnknownSample(sample_id.into()))
    }

    fn check_annotator(&self, annotator_id: &str) -> Result<(), AnnotationError> {
        if self.annotators.iter().any(|a| a == annotator_id) {
            Ok(())
        } else {
            Err(AnnotationError::UnknownAnnotator(annotator_id.into()))
        }
    }

    /// Stores a record; a resubmission by the same annotator replaces the
    /// earlier one.
    pub fn submit_annotation(&self, mut record: AnnotationRecord) -> Result<Acknowledgement, AnnotationError> {
        self.task(&record.sample_id)?;
        self.check_annotator(&record.annotator_id)?;
        record.validate()?;
        if record.timestamp == 0 {
            record.timestamp = now_millis();
        }
        let mut inner = self.inner.write();
        self.append(&LogEvent::Annotation(record.clone()))?;
        let key = (record.sample_id.clone(), record.annotator_id.clone());
        inner.records.insert(key, record.clone());
        let votes = self.votes_locked(&inner, &record.sample_id);
        let pending = match &votes {
            Some(v) => self.pending_dims(&inner, &record.sample_id, v),
            None => Vec::new(),
        };
        let annotations = self
            .annotators
            .iter()
            .filter(|a| inner.records.contains_key(&(record.sample_id.clone(), a.to_string())))
            .count();
        Ok(Acknowledgement {
            sample_id: record.sample_id,
            annotator_id: record.annotator_id,
            timestamp: record.timestamp,
            annotations,
            pending,
        })
    }

    /// All four records of a sample in annotator order, if complete.
    fn votes_locked(&self, inner: &Inner, sample_id: &str) -> Option<Vec<AnnotationRecord>> {
        self.annotators
            .iter()
            .map(|a| inner.records.get(&(sample_id.to_string(), a.clone())).cloned())
            .collect()
    }

    fn pending_dims(&self, inner: &Inner, sample_id: &str, votes: &[AnnotationRecord]) -> Vec<Dimension> {
        let resolved = inner.resolutions.get(sample_id);
        Dimension::ALL
            .into_iter()
            .filter(|&d| {
                let v: Vec<u8> = votes.iter().map(|r| r.label(d)).collect();
                aggregate_votes(&v) == Outcome::NeedsAdjudication
                    && !resolved.is_some_and(|m| m.contains_key(&d))
            })
            .collect()
    }

    /// Per-dimension majority outcome of a complete sample.
    pub fn aggregate_labels(&self, sample_id: &str) -> Result<Aggregate, AnnotationError> {
        self.task(sample_id)?;
        let inner = self.inner.read();
        let votes = self.complete_votes(&inner, sample_id)?;
        let outcome = |d: Dimension| {
            let v: Vec<u8> = votes.iter().map(|r| r.label(d)).collect();
            aggregate_votes(&v)
        };
        Ok(Aggregate {
            water: outcome(Dimension::Water),
            forest: outcome(Dimension::Forest),
            biodiversity: outcome(Dimension::Biodiversity),
        })
    }

    fn complete_votes(&self, inner: &Inner, sample_id: &str) -> Result<Vec<AnnotationRecord>, AnnotationError> {
        self.votes_locked(inner, sample_id).ok_or_else(|| {
            let have = self
                .annotators
                .iter()
                .filter(|a| inner.records.contains_key(&(sample_id.to_string(), a.to_string())))
                .count();
            AnnotationError::Incomplete {
                sample_id: sample_id.into(),
                have,
            }
        })
    }

    /// Pending 2–2 splits in task order, then dimension order.
    pub fn adjudication_queue(&self) -> Vec<PendingAdjudication> {
        let inner = self.inner.read();
        let mut out = Vec::new();
        for task in &self.tasks {
            let Some(votes) = self.votes_locked(&inner, &task.sample_id) else { continue };
            for d in self.pending_dims(&inner, &task.sample_id, &votes) {
                out.push(PendingAdjudication {
                    sample_id: task.sample_id.clone(),
                    text: task.text.clone(),
                    dimension: d,
                    votes: votes
                        .iter()
                        .map(|r| (r.annotator_id.clone(), r.label(d)))
                        .collect(),
                });
            }
        }
        out
    }

    /// Sets the gold value of a pending split and records an audit entry.
    pub fn resolve_adjudication(
        &self,
        sample_id: &str,
        dimension: Dimension,
        value: u8,
        resolver_id: &str,
    ) -> Result<GoldSample, AnnotationError> {
        if value > 1 {
            return Err(AnnotationError::NonBinary { field: "value", value });
        }
        let entry = AuditEntry {
            sample_id: sample_id.into(),
            dimension,
            value,
            resolver_id: resolver_id.into(),
            votes: BTreeMap::new(),
            timestamp: now_millis(),
        };
        self.apply_resolution(entry)?;
        self.gold_sample(sample_id)
            .or_else(|e| match e {
                // Other dimensions may still be pending; report what is known.
                AnnotationError::ExportBlocked(_) => self.partial_gold(sample_id),
                e => Err(e),
            })
    }

    fn apply_resolution(&self, mut entry: AuditEntry) -> Result<(), AnnotationError> {
        self.task(&entry.sample_id)?;
        let mut inner = self.inner.write();
        let pending = match self.votes_locked(&inner, &entry.sample_id) {
            Some(votes) => {
                entry.votes = votes
                    .iter()
                    .map(|r| (r.annotator_id.clone(), r.label(entry.dimension)))
                    .collect();
                self.pending_dims(&inner, &entry.sample_id, &votes)
            }
            None => Vec::new(),
        };
        if !pending.contains(&entry.dimension) {
            return Err(AnnotationError::NotPending {
                sample_id: entry.sample_id,
                dimension: entry.dimension,
            });
        }
        self.append(&LogEvent::Resolution(entry.clone()))?;
        inner
            .resolutions
            .entry(entry.sample_id.clone())
            .or_default()
            .insert(entry.dimension, entry.clone());
        inner.audit.push(entry);
        Ok(())
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.inner.read().audit.clone()
    }

    fn resolve_dims(
        &self,
        inner: &Inner,
        sample_id: &str,
    ) -> Result<([Option<u8>; 3], Resolution), AnnotationError> {
        let votes = self.complete_votes(inner, sample_id)?;
        let mut values = [None; 3];
        let mut unanimous = true;
        let mut adjudicated = false;
        for (i, d) in Dimension::ALL.into_iter().enumerate() {
            let v: Vec<u8> = votes.iter().map(|r| r.label(d)).collect();
            unanimous &= v.iter().all(|&x| x == v[0]);
            values[i] = match aggregate_votes(&v) {
                Outcome::One => Some(1),
                Outcome::Zero => Some(0),
                Outcome::NeedsAdjudication => {
                    let r = inner
                        .resolutions
                        .get(sample_id)
                        .and_then(|m| m.get(&d))
                        .map(|a| a.value);
                    adjudicated |= r.is_some();
                    r
                }
            };
        }
        let resolution = if adjudicated {
            Resolution::Adjudicated
        } else if unanimous {
            Resolution::Unanimous
        } else {
            Resolution::Majority
        };
        Ok((values, resolution))
    }

    fn partial_gold(&self, sample_id: &str) -> Result<GoldSample, AnnotationError> {
        let inner = self.inner.read();
        let (v, resolution) = self.resolve_dims(&inner, sample_id)?;
        let task = self.task(sample_id)?;
        let [w, f, b] = v.map(|x| x.unwrap_or(0));
        Ok(GoldSample {
            sample_id: task.sample_id.clone(),
            text: task.text.clone(),
            water: w,
            forest: f,
            biodiversity: b,
            nature: w | f | b,
            resolution,
        })
    }

    /// Final labels of a sample; fails while it is incomplete or pending.
    pub fn gold_sample(&self, sample_id: &str) -> Result<GoldSample, AnnotationError> {
        let task = self.task(sample_id)?;
        let inner = self.inner.read();
        self.gold_locked(&inner, task)
    }

    fn gold_locked(&self, inner: &Inner, task: &Task) -> Result<GoldSample, AnnotationError> {
        let (values, resolution) = match self.resolve_dims(inner, &task.sample_id) {
            Ok(x) => x,
            Err(AnnotationError::Incomplete { sample_id, .. }) => {
                let missing = self
                    .annotators
                    .iter()
                    .filter(|a| !inner.records.contains_key(&(sample_id.clone(), a.to_string())))
                    .cloned()
                    .collect();
                return Err(AnnotationError::ExportBlocked(vec![Blocker::Incomplete {
                    sample_id,
                    missing,
                }]));
            }
            Err(e) => return Err(e),
        };
        let blockers: Vec<Blocker> = Dimension::ALL
            .into_iter()
            .zip(values)
            .filter(|(_, v)| v.is_none())
            .map(|(d, _)| Blocker::PendingAdjudication {
                sample_id: task.sample_id.clone(),
                dimension: d,
            })
            .collect();
        if !blockers.is_empty() {
            return Err(AnnotationError::ExportBlocked(blockers));
        }
        let [w, f, b] = values.map(|x| x.expect("resolved"));
        Ok(GoldSample {
            sample_id: task.sample_id.clone(),
            text: task.text.clone(),
            water: w,
            forest: f,
            biodiversity: b,
            nature: w | f | b,
            resolution,
        })
    }

    /// Gold labels of every task in task order, or the full list of
    /// blockers.
    pub fn export_gold(&self) -> Result<GoldExport, AnnotationError> {
        let inner = self.inner.read();
        let mut samples = Vec::with_capacity(self.tasks.len());
        let mut blockers = Vec::new();
        for task in &self.tasks {
            match self.gold_locked(&inner, task) {
                Ok(s) => samples.push(s),
                Err(AnnotationError::ExportBlocked(b)) => blockers.extend(b),
                Err(e) => return Err(e),
            }
        }
        if !blockers.is_empty() {
            return Err(AnnotationError::ExportBlocked(blockers));
        }
        let records: Vec<GoldRecord> = samples.iter().map(GoldSample::to_record).collect();
        Ok(GoldExport {
            distribution: LabelDistribution::of(&records),
            samples,
        })
    }

    /// Records of the samples that all four annotators finished.
    pub fn complete_records(&self) -> Vec<AnnotationRecord> {
        let inner = self.inner.read();
        self.tasks
            .iter()
            .filter_map(|t| self.votes_locked(&inner, &t.sample_id))
            .flatten()
            .collect()
    }

    pub fn agreement(&self) -> Result<AgreementReport, AnnotationError> {
        agreement_report(&self.complete_records())
    }

    /// First task in order that `annotator_id` has not labeled yet.
    pub fn next_task(&self, annotator_id: &str) -> Result<Option<Task>, AnnotationError> {
        self.check_annotator(annotator_id)?;
        let inner = self.inner.read();
        Ok(self
            .tasks
            .iter()
            .find(|t| {
                !inner
                    .records
                    .contains_key(&(t.sample_id.clone(), annotator_id.to_string()))
            })
            .cloned())
    }

    pub fn progress(&self) -> Progress {
        let inner = self.inner.read();
        let per_annotator = self
            .annotators
            .iter()
            .map(|a| {
                let n = inner.records.keys().filter(|(_, ann)| ann == a).count();
                (a.clone(), n)
            })
            .collect();
        let complete_samples = self
            .tasks
            .iter()
            .filter(|t| self.votes_locked(&inner, &t.sample_id).is_some())
            .count();
        drop(inner);
        Progress {
            total_tasks: self.tasks.len(),
            per_annotator,
            complete_samples,
            pending_adjudications: self.adjudication_queue().len(),
        }
    }
}

/// Loads annotation tasks from a gold-format or sentence file: jsonl or csv
/// rows with `sample_id` (or `sent_id`) and `text`.
pub fn load_tasks(path: &Path) -> Result<Vec<Task>, AnnotationError> {
    #[derive(Deserialize)]
    struct Row {
        #[serde(alias = "sent_id")]
        sample_id: String,
        text: String,
    }
    let err = |reason: String| AnnotationError::Log {
        path: path.to_path_buf(),
        reason,
    };
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let rows: Vec<Row> = if is_csv {
        let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        r.deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| err(e.to_string()))?
    } else {
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
            .collect::<Result<_, _>>()?
    };
    Ok(rows
        .into_iter()
        .map(|r| Task {
            sample_id: r.sample_id,
            text: r.text,
        })
        .collect())
}

/// Reads annotation records from a store event log or a plain jsonl of
/// records. Later records for the same (sample, annotator) replace earlier
/// ones; the result is sorted by sample then annotator.
pub fn load_annotation_records(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let err = |reason: String| AnnotationError::Log {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut latest: BTreeMap<(String, String), AnnotationRecord> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = match serde_json::from_str::<LogEvent>(line) {
            Ok(LogEvent::Annotation(r)) => r,
            Ok(LogEvent::Resolution(_)) => continue,
            Err(_) => serde_json::from_str::<AnnotationRecord>(line)
                .map_err(|e| err(format!("line {}: {e}", i + 1)))?,
        };
        record.validate()?;
        latest.insert((record.sample_id.clone(), record.annotator_id.clone()), record);
    }
    Ok(latest.into_values().collect())
}

/// Keeps only samples with exactly [`ANNOTATORS`] records.
pub fn complete_only(records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    let mut per: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        per.entry(&r.sample_id).or_default().push(r);
    }
    per.into_values()
        .filter(|v| v.len() == ANNOTATORS)
        .flatten()
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// HTTP API

#[derive(Clone)]
struct ApiState {
    store: Arc<AnnotationStore>,
    guidelines: Arc<Guidelines>,
}

struct ApiError(StatusCode, String);

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match &e {
            AnnotationError::UnknownSample(_) | AnnotationError::UnknownAnnotator(_) => {
                StatusCode::NOT_FOUND
            }
            AnnotationError::NonBinary { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            AnnotationError::NotPending { .. }
            | AnnotationError::Incomplete { .. }
            | AnnotationError::TooFewItems(_)
            | AnnotationError::ExportBlocked(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Serialize)]
struct NextTask {
    task: Option<Task>,
    guidelines: Guidelines,
}

async fn next_task(
    State(s): State<ApiState>,
    Query(q): Query<NextQuery>,
) -> Result<Json<NextTask>, ApiError> {
    let task = s.store.next_task(&q.annotator)?;
    Ok(Json(NextTask {
        task,
        guidelines: Guidelines::clone(&s.guidelines),
    }))
}

async fn post_annotation(
    State(s): State<ApiState>,
    Json(record): Json<AnnotationRecord>,
) -> Result<Json<Acknowledgement>, ApiError> {
    Ok(Json(s.store.submit_annotation(record)?))
}

async fn list_adjudications(State(s): State<ApiState>) -> Json<Vec<PendingAdjudication>> {
    Json(s.store.adjudication_queue())
}

async fn post_adjudication(
    State(s): State<ApiState>,
    UrlPath(sample_id): UrlPath<String>,
    Json(req): Json<AdjudicationRequest>,
) -> Result<Json<GoldSample>, ApiError> {
    Ok(Json(s.store.resolve_adjudication(
        &sample_id,
        req.dimension,
        req.value,
        &req.resolver_id,
    )?))
}

async fn get_agreement(State(s): State<ApiState>) -> Result<Json<AgreementReport>, ApiError> {
    Ok(Json(s.store.agreement()?))
}

async fn get_progress(State(s): State<ApiState>) -> Json<Progress> {
    Json(s.store.progress())
}

async fn get_guidelines(State(s): State<ApiState>) -> Json<Guidelines> {
    Json(Guidelines::clone(&s.guidelines))
}

/// The annotation API. With `static_dir`, other paths serve files from it
/// (the UI bundle).
pub fn router(store: Arc<AnnotationStore>, guidelines: Guidelines, static_dir: Option<&Path>) -> Router {
    let state = ApiState {
        store,
        guidelines: Arc::new(guidelines),
    };
    let api = Router::new()
        .route("/tasks/next", get(next_task))
        .route("/annotations", post(post_annotation))
        .route("/adjudications", get(list_adjudications))
        .route("/adjudications/{sample_id}", post(post_adjudication))
        .route("/agreement", get(get_agreement))
        .route("/progress", get(get_progress))
        .route("/guidelines", get(get_guidelines))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Runs the API until Ctrl-C.
pub async fn serve(app: Router, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
