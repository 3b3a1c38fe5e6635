//! Positive-class binary metrics, stratified k-fold splits, cross-validation
//! reports and comparison tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, GoldDataset, GoldRecord, Target};
use crate::sampling;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("prediction and gold ids differ: {missing} gold ids without prediction, {extra} predictions without gold")]
    IdMismatch { missing: usize, extra: usize },
    #[error("label value {0} is not binary")]
    NotBinary(u8),
    #[error("{samples} samples with {positives} positives cannot be split into {k} stratified folds")]
    TooFewSamples {
        samples: usize,
        positives: usize,
        k: usize,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("fold spec refers to unknown sample {0:?}")]
    UnknownSample(String),
}

/// Confusion counts with the target label as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_pairs<I: IntoIterator<Item = (u8, u8)>>(pairs: I) -> Confusion {
        let mut c = Confusion::default();
        for (pred, gold) in pairs {
            c.add(pred == 1, gold == 1);
        }
        c
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Precision, recall and F1 are 0 when their denominator is 0.
    pub fn metrics(&self) -> Metrics {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            f1,
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
        }
    }

    /// 2x2 matrix as CSV, rows = gold label, columns = prediction.
    pub fn to_csv(&self) -> String {
        format!(
            "gold\\predicted,0,1\n0,{},{}\n1,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    F1,
    Accuracy,
    Precision,
    Recall,
}

impl Metrics {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::F1 => self.f1,
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
        }
    }

    fn from_fn(f: impl Fn(MetricKind) -> f64) -> Metrics {
        Metrics {
            f1: f(MetricKind::F1),
            accuracy: f(MetricKind::Accuracy),
            precision: f(MetricKind::Precision),
            recall: f(MetricKind::Recall),
        }
    }
}

/// Confusion counts of predictions against gold labels keyed by sample id.
pub fn confusion_for(
    predictions: &HashMap<String, u8>,
    gold: &HashMap<String, u8>,
) -> Result<Confusion, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let missing = gold.keys().filter(|k| !predictions.contains_key(*k)).count();
    let extra = predictions.keys().filter(|k| !gold.contains_key(*k)).count();
    if missing + extra > 0 {
        return Err(EvalError::IdMismatch { missing, extra });
    }
    let mut c = Confusion::default();
    for (id, &g) in gold {
        let p = predictions[id];
        for v in [p, g] {
            if v > 1 {
                return Err(EvalError::NotBinary(v));
            }
        }
        c.add(p == 1, g == 1);
    }
    Ok(c)
}

pub fn binary_metrics(
    predictions: &HashMap<String, u8>,
    gold: &HashMap<String, u8>,
) -> Result<Metrics, EvalError> {
    confusion_for(predictions, gold).map(|c| c.metrics())
}

/// Test-split sample ids of every fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
    pub target: Target,
    pub folds: Vec<Vec<String>>,
}

impl FoldSpec {
    /// Training ids of fold `fold` (0-based): every id outside its test split,
    /// in fold order.
    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, ids)| ids.iter().map(String::as_str))
            .collect()
    }

    pub fn load(path: &Path) -> Result<FoldSpec, std::io::Error> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Stratified `k`-fold split.
///
/// Positives and negatives are shuffled separately, then dealt round-robin in
/// one pass (positives first), so fold sizes differ by at most one and every
/// fold holds `floor(P/k)` or `ceil(P/k)` positives.
pub fn make_folds(
    dataset: &GoldDataset,
    target: Target,
    k: usize,
    seed: u64,
) -> Result<FoldSpec, EvalError> {
    let labels = dataset.labels(target)?;
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    if k < 2 || labels.len() < k || positives.len() < k {
        return Err(EvalError::TooFewSamples {
            samples: labels.len(),
            positives: positives.len(),
            k,
        });
    }
    let mut rng = sampling::rng(seed);
    let mut shuffled = |items: &[usize]| -> Vec<usize> {
        let mut v = items.to_vec();
        rand::seq::SliceRandom::shuffle(v.as_mut_slice(), &mut rng);
        v
    };
    let order: Vec<usize> = shuffled(&positives)
        .into_iter()
        .chain(shuffled(&negatives))
        .collect();
    let mut folds = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(dataset.records[idx].sample_id.clone());
    }
    Ok(FoldSpec {
        k,
        seed,
        target,
        folds,
    })
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("prediction file {path} unavailable: {reason}")]
    MissingFile { path: PathBuf, reason: String },
    #[error("prediction file {path} line {line}: {reason}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{0}")]
    Other(String),
}

/// Produces predictions for one fold.
pub trait PredictionRunner {
    /// Model tag used in reports.
    fn model(&self) -> String;

    /// Predicted labels for every record of `test`, keyed by sample id.
    fn predict(
        &mut self,
        fold: usize,
        train: &[&GoldRecord],
        test: &[&GoldRecord],
    ) -> Result<HashMap<String, u8>, RunnerError>;
}

/// Predicts the same label for every sample.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRunner(pub u8);

impl PredictionRunner for ConstantRunner {
    fn model(&self) -> String {
        format!("constant-{}", self.0)
    }

    fn predict(
        &mut self,
        _fold: usize,
        _train: &[&GoldRecord],
        test: &[&GoldRecord],
    ) -> Result<HashMap<String, u8>, RunnerError> {
        Ok(test.iter().map(|r| (r.sample_id.clone(), self.0)).collect())
    }
}

/// One line of a per-fold prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<u8>,
}

/// Reads predictions written by an external trainer, one jsonl file per fold
/// at `<dir>/fold-<n>.jsonl` with `n` counted from 1.
#[derive(Debug, Clone)]
pub struct PredictionFileRunner {
    pub dir: PathBuf,
    pub model: String,
    pub threshold: f64,
}

impl PredictionFileRunner {
    pub fn new(dir: impl Into<PathBuf>, model: &str) -> Self {
        PredictionFileRunner {
            dir: dir.into(),
            model: model.to_string(),
            threshold: 0.5,
        }
    }

    pub fn fold_path(&self, fold: usize) -> PathBuf {
        self.dir.join(format!("fold-{}.jsonl", fold + 1))
    }

    pub fn read_fold(&self, fold: usize) -> Result<HashMap<String, u8>, RunnerError> {
        let path = self.fold_path(fold);
        let text = fs::read_to_string(&path).map_err(|e| RunnerError::MissingFile {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let mut out = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| RunnerError::BadRecord {
                path: path.clone(),
                line: i + 1,
                reason,
            };
            let rec: PredictionRecord =
                serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let label = match (rec.pred, rec.prob) {
                (Some(p @ (0 | 1)), _) => p,
                (Some(p), _) => return Err(bad(format!("pred {p} is not 0 or 1"))),
                (None, Some(prob)) if (0.0..=1.0).contains(&prob) => {
                    u8::from(prob >= self.threshold)
                }
                (None, Some(prob)) => return Err(bad(format!("prob {prob} outside [0,1]"))),
                (None, None) => return Err(bad("record has neither pred nor prob".into())),
            };
            out.insert(rec.sample_id, label);
        }
        Ok(out)
    }
}

impl PredictionRunner for PredictionFileRunner {
    fn model(&self) -> String {
        self.model.clone()
    }

    fn predict(
        &mut self,
        fold: usize,
        _train: &[&GoldRecord],
        _test: &[&GoldRecord],
    ) -> Result<HashMap<String, u8>, RunnerError> {
        self.read_fold(fold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based fold number.
    pub fold: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub target: Target,
    pub hyperparameters: String,
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub mean: Metrics,
    /// Population standard deviation over the fold values.
    pub std: Metrics,
}

impl CvReport {
    pub fn new(model: &str, target: Target, hyperparameters: &str, k: usize) -> Self {
        CvReport {
            model: model.to_string(),
            target,
            hyperparameters: hyperparameters.to_string(),
            k,
            folds: Vec::new(),
            mean: Metrics::default(),
            std: Metrics::default(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.folds.len() == self.k
    }

    /// Confusion counts summed over all folds.
    pub fn pooled(&self) -> Confusion {
        self.folds
            .iter()
            .fold(Confusion::default(), |acc, f| acc.merge(&f.confusion))
    }

    fn push(&mut self, result: FoldResult) {
        self.folds.push(result);
        let values: Vec<Metrics> = self.folds.iter().map(|f| f.metrics).collect();
        let n = values.len() as f64;
        self.mean = Metrics::from_fn(|k| values.iter().map(|m| m.get(k)).sum::<f64>() / n);
        let mean = self.mean;
        self.std = Metrics::from_fn(|k| {
            (values
                .iter()
                .map(|m| (m.get(k) - mean.get(k)).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        });
    }
}

/// A fold failed; `partial` keeps the folds evaluated before it.
#[derive(Debug, Error)]
#[error("fold {fold} failed: {source}")]
pub struct CvFailure {
    pub fold: usize,
    pub partial: Box<CvReport>,
    #[source]
    pub source: RunnerError,
}

/// Runs `runner` on every fold and collects per-fold and aggregate metrics.
pub fn cross_validate<R: PredictionRunner + ?Sized>(
    runner: &mut R,
    dataset: &GoldDataset,
    folds: &FoldSpec,
    hyperparameters: &str,
) -> Result<CvReport, CvFailure> {
    let target = folds.target;
    let mut report = CvReport::new(&runner.model(), target, hyperparameters, folds.k);
    let by_id: HashMap<&str, &GoldRecord> = dataset
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    let resolve = |ids: Vec<&str>| -> Result<Vec<&GoldRecord>, RunnerError> {
        ids.into_iter()
            .map(|id| {
                by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| RunnerError::Other(format!("unknown sample {id:?} in fold spec")))
            })
            .collect()
    };
    for fold in 0..folds.k {
        let outcome = (|| {
            let train = resolve(folds.train_ids(fold))?;
            let test = resolve(folds.folds[fold].iter().map(String::as_str).collect())?;
            let preds = runner.predict(fold, &train, &test)?;
            let gold: HashMap<String, u8> = test
                .iter()
                .map(|r| (r.sample_id.clone(), r.label(target)))
                .collect();
            let preds: HashMap<String, u8> = preds
                .into_iter()
                .filter(|(id, _)| gold.contains_key(id))
                .collect();
            confusion_for(&preds, &gold).map_err(|e| RunnerError::Other(e.to_string()))
        })();
        match outcome {
            Ok(confusion) => report.push(FoldResult {
                fold: fold + 1,
                confusion,
                metrics: confusion.metrics(),
            }),
            Err(source) => {
                return Err(CvFailure {
                    fold: fold + 1,
                    partial: Box::new(report),
                    source,
                })
            }
        }
    }
    Ok(report)
}

/// One cell of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub mean: f64,
    pub std: f64,
    pub best: bool,
}

impl TableCell {
    pub fn render(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}

/// `"0.9419 (0.0081)"`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4} ({std:.4})")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub target: Target,
    pub hyperparameters: String,
    pub cells: Vec<Option<TableCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub metric: MetricKind,
    pub models: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Groups reports by (target, hyperparameters) with one column per model and
/// flags the best mean of each row (first model wins ties).
pub fn results_table(reports: &[CvReport], metric: MetricKind) -> ResultsTable {
    let mut models: Vec<String> = Vec::new();
    let mut row_keys: Vec<(Target, String)> = Vec::new();
    for r in reports {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
        let key = (r.target, r.hyperparameters.clone());
        if !row_keys.contains(&key) {
            row_keys.push(key);
        }
    }
    // Stable sort keeps first-appearance order of hyperparameters per target.
    row_keys.sort_by_key(|(t, _)| *t);

    let rows = row_keys
        .into_iter()
        .map(|(target, hyperparameters)| {
            let mut cells: Vec<Option<TableCell>> = models
                .iter()
                .map(|m| {
                    reports
                        .iter()
                        .find(|r| {
                            &r.model == m
                                && r.target == target
                                && r.hyperparameters == hyperparameters
                        })
                        .map(|r| TableCell {
                            mean: r.mean.get(metric),
                            std: r.std.get(metric),
                            best: false,
                        })
                })
                .collect();
            let best = cells
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.as_ref().map(|c| (i, c.mean)))
                .fold(None::<(usize, f64)>, |acc, (i, m)| match acc {
                    Some((_, bm)) if bm >= m => acc,
                    _ => Some((i, m)),
                });
            if let Some((i, _)) = best {
                if let Some(c) = cells[i].as_mut() {
                    c.best = true;
                }
            }
            TableRow {
                target,
                hyperparameters,
                cells,
            }
        })
        .collect();
    ResultsTable {
        metric,
        models,
        rows,
    }
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["dimension".to_string(), "hyperparameters".to_string()];
        header.extend(self.models.iter().cloned());
        header.push("best".into());
        w.write_record(&header).expect("in-memory csv");
        for row in &self.rows {
            let mut rec = vec![row.target.to_string(), row.hyperparameters.clone()];
            rec.extend(
                row.cells
                    .iter()
                    .map(|c| c.as_ref().map(TableCell::render).unwrap_or_default()),
            );
            let best = row
                .cells
                .iter()
                .position(|c| c.as_ref().is_some_and(|c| c.best))
                .map(|i| self.models[i].clone())
                .unwrap_or_default();
            rec.push(best);
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    /// Aligned plain text; the best cell of each row carries a trailing `*`.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["dimension".to_string(), "hyperparameters".to_string()];
        header.extend(self.models.iter().cloned());
        grid.push(header);
        for row in &self.rows {
            let mut line = vec![row.target.to_string(), row.hyperparameters.clone()];
            line.extend(row.cells.iter().map(|c| match c {
                Some(c) if c.best => format!("{}*", c.render()),
                Some(c) => c.render(),
                None => "-".into(),
            }));
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|col| grid.iter().map(|r| r[col].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Checks that `folds` partitions exactly the ids of `dataset`.
pub fn check_partition(dataset: &GoldDataset, folds: &FoldSpec) -> Result<(), EvalError> {
    let all: BTreeSet<&str> = dataset.records.iter().map(|r| r.sample_id.as_str()).collect();
    let mut seen = BTreeSet::new();
    for id in folds.folds.iter().flatten() {
        if !all.contains(id.as_str()) {
            return Err(EvalError::UnknownSample(id.clone()));
        }
        if !seen.insert(id.as_str()) {
            return Err(EvalError::UnknownSample(format!("{id} (repeated)")));
        }
    }
    if seen.len() != all.len() {
        return Err(EvalError::IdMismatch {
            missing: all.len() - seen.len(),
            extra: 0,
        });
    }
    Ok(())
}

/// Per-fold positive counts, in fold order.
pub fn positives_per_fold(dataset: &GoldDataset, folds: &FoldSpec) -> BTreeMap<usize, usize> {
    let label: HashMap<&str, u8> = dataset
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r.label(folds.target)))
        .collect();
    folds
        .folds
        .iter()
        .enumerate()
        .map(|(i, ids)| {
            (
                i + 1,
                ids.iter()
                    .filter(|id| label.get(id.as_str()) == Some(&1))
                    .count(),
            )
        })
        .collect()
}
