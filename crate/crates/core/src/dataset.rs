//! Gold dataset files.
//!
//! CSV files carry the header `sample_id,text,water,forest,biodiversity,nature`;
//! jsonl files carry one object per line with the same fields. `sample_id` is
//! optional on input (rows are then named `row-<n>`), label columns may be
//! missing, extra columns are ignored. A missing `nature` column is derived as
//! the OR of the three dimension labels when those are all present.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keywords::Dimension;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("dataset has no {0:?} label column")]
    MissingLabel(Target),
    #[error("duplicate sample_id {0:?}")]
    DuplicateSample(String),
    #[error("row {sample_id:?}: nature={nature} but water|forest|biodiversity={derived}")]
    NatureMismatch {
        sample_id: String,
        nature: u8,
        derived: u8,
    },
}

/// A binary label column of the gold data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Water,
    Forest,
    Biodiversity,
    Nature,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Water, Target::Forest, Target::Biodiversity, Target::Nature];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Water => "water",
            Target::Forest => "forest",
            Target::Biodiversity => "biodiversity",
            Target::Nature => "nature",
        }
    }
}

impl From<Dimension> for Target {
    fn from(d: Dimension) -> Self {
        match d {
            Dimension::Water => Target::Water,
            Dimension::Forest => Target::Forest,
            Dimension::Biodiversity => Target::Biodiversity,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "water" => Ok(Target::Water),
            "forest" => Ok(Target::Forest),
            "biodiversity" => Ok(Target::Biodiversity),
            "nature" => Ok(Target::Nature),
            other => Err(format!(
                "unknown target {other:?} (expected water, forest, biodiversity or nature)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub sample_id: String,
    pub text: String,
    pub water: u8,
    pub forest: u8,
    pub biodiversity: u8,
    pub nature: u8,
}

impl GoldRecord {
    pub fn new(sample_id: &str, text: &str, water: u8, forest: u8, biodiversity: u8) -> Self {
        GoldRecord {
            sample_id: sample_id.to_string(),
            text: text.to_string(),
            water,
            forest,
            biodiversity,
            nature: water | forest | biodiversity,
        }
    }

    pub fn label(&self, target: Target) -> u8 {
        match target {
            Target::Water => self.water,
            Target::Forest => self.forest,
            Target::Biodiversity => self.biodiversity,
            Target::Nature => self.nature,
        }
    }

    pub fn nature_is_consistent(&self) -> bool {
        self.nature == (self.water | self.forest | self.biodiversity)
    }
}

/// Rows of a gold file and the label columns it actually carried.
#[derive(Debug, Clone, Default)]
pub struct GoldDataset {
    pub records: Vec<GoldRecord>,
    pub columns: BTreeSet<Target>,
}

#[derive(Deserialize)]
struct RawRow {
    sample_id: Option<serde_json::Value>,
    text: Option<String>,
    water: Option<serde_json::Value>,
    forest: Option<serde_json::Value>,
    biodiversity: Option<serde_json::Value>,
    nature: Option<serde_json::Value>,
}

fn parse_label(v: &str) -> Result<u8, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "0" | "0.0" | "false" | "no" => Ok(0),
        "1" | "1.0" | "true" | "yes" => Ok(1),
        other => Err(format!("label value {other:?} is not binary")),
    }
}

fn json_label(v: &serde_json::Value) -> Result<u8, String> {
    match v {
        serde_json::Value::Bool(b) => Ok(u8::from(*b)),
        serde_json::Value::Number(n) => parse_label(&n.to_string()),
        serde_json::Value::String(s) => parse_label(s),
        other => Err(format!("label value {other} is not binary")),
    }
}

fn json_id(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl GoldDataset {
    pub fn from_records(records: Vec<GoldRecord>) -> Self {
        GoldDataset {
            records,
            columns: Target::ALL.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Labels of `target` in row order.
    pub fn labels(&self, target: Target) -> Result<Vec<u8>, DatasetError> {
        if !self.columns.contains(&target) {
            return Err(DatasetError::MissingLabel(target));
        }
        Ok(self.records.iter().map(|r| r.label(target)).collect())
    }

    /// Checks `nature = water | forest | biodiversity` on every row.
    pub fn check_nature_invariant(&self) -> Result<(), DatasetError> {
        for r in &self.records {
            if !r.nature_is_consistent() {
                return Err(DatasetError::NatureMismatch {
                    sample_id: r.sample_id.clone(),
                    nature: r.nature,
                    derived: r.water | r.forest | r.biodiversity,
                });
            }
        }
        Ok(())
    }

    /// Loads a `.csv` or `.jsonl` gold file (chosen by extension; anything but
    /// `.csv` is read as jsonl).
    pub fn load(path: &Path) -> Result<GoldDataset, DatasetError> {
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let rows = if is_csv {
            Self::read_csv_rows(path)?
        } else {
            Self::read_jsonl_rows(path)?
        };
        Self::assemble(path, rows)
    }

    fn read_csv_rows(path: &Path) -> Result<Vec<RawRow>, DatasetError> {
        let fmt_err = |reason: String| DatasetError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| fmt_err(e.to_string()))?;
        let headers = reader
            .headers()
            .map_err(|e| fmt_err(e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (id_c, text_c) = (col("sample_id"), col("text"));
        let label_c = [col("water"), col("forest"), col("biodiversity"), col("nature")];
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
            let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(str::to_string);
            let lab = |c: Option<usize>| get(c).map(serde_json::Value::String);
            rows.push(RawRow {
                sample_id: get(id_c).map(serde_json::Value::String),
                text: get(text_c),
                water: lab(label_c[0]),
                forest: lab(label_c[1]),
                biodiversity: lab(label_c[2]),
                nature: lab(label_c[3]),
            });
        }
        Ok(rows)
    }

    fn read_jsonl_rows(path: &Path) -> Result<Vec<RawRow>, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| DatasetError::Format {
                    path: path.to_path_buf(),
                    reason: format!("line {}: {e}", i + 1),
                })
            })
            .collect()
    }

    fn assemble(path: &Path, rows: Vec<RawRow>) -> Result<GoldDataset, DatasetError> {
        let fmt_err = |reason: String| DatasetError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut columns = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut records = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let sample_id = row
                .sample_id
                .as_ref()
                .map(json_id)
                .unwrap_or_else(|| format!("row-{}", i + 1));
            let text = row
                .text
                .ok_or_else(|| fmt_err(format!("row {}: missing text", i + 1)))?;
            let mut labels = [0u8; 4];
            let raw = [&row.water, &row.forest, &row.biodiversity, &row.nature];
            for (slot, (target, value)) in Target::ALL.iter().zip(raw).enumerate() {
                if let Some(v) = value {
                    labels[slot] = json_label(v).map_err(|e| fmt_err(format!("row {}: {e}", i + 1)))?;
                    if i == 0 {
                        columns.insert(*target);
                    }
                } else if columns.contains(target) {
                    return Err(fmt_err(format!("row {}: missing {target}", i + 1)));
                }
            }
            if !seen.insert(sample_id.clone()) {
                return Err(DatasetError::DuplicateSample(sample_id));
            }
            records.push(GoldRecord {
                sample_id,
                text,
                water: labels[0],
                forest: labels[1],
                biodiversity: labels[2],
                nature: labels[3],
            });
        }
        let dims = [Target::Water, Target::Forest, Target::Biodiversity];
        if !columns.contains(&Target::Nature) && dims.iter().all(|d| columns.contains(d)) {
            for r in &mut records {
                r.nature = r.water | r.forest | r.biodiversity;
            }
            columns.insert(Target::Nature);
        }
        Ok(GoldDataset { records, columns })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(["sample_id", "text", "water", "forest", "biodiversity", "nature"])
            .expect("in-memory csv");
        for r in &self.records {
            w.write_record([
                r.sample_id.as_str(),
                r.text.as_str(),
                &r.water.to_string(),
                &r.forest.to_string(),
                &r.biodiversity.to_string(),
                &r.nature.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serializable record"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let body = if is_csv { self.to_csv() } else { self.to_jsonl() };
        let mut f = fs::File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        f.write_all(body.as_bytes())
            .map_err(|source| DatasetError::Io {
                path: path.to_path_buf(),
                source,
            })
    }
}
