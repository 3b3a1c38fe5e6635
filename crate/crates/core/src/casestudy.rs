//! Earnings-call exposure aggregation.
//!
//! Sentence labels (from gold files or model predictions) are turned into
//! per-transcript exposure ratios, averaged per company and year, then per
//! industry (Fama-French 49 codes) and summarised per country as the share
//! of calls that mention nature at least once. All means are unweighted.
//! Every grouping goes through ordered maps, so outputs do not depend on
//! input order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("cannot read {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("transcript {0:?} has no sentences")]
    EmptyTranscript(String),
    #[error("empty group {0}")]
    EmptyGroup(String),
    #[error("label {field}={value} in sentence {sent_id:?} is not binary")]
    NonBinary {
        sent_id: String,
        field: &'static str,
        value: u8,
    },
    #[error("duplicate {kind} {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("no {0} left after applying the mapping")]
    EmptyCoverage(&'static str),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub doc_id: String,
    pub sent_id: String,
    pub water: u8,
    pub forest: u8,
    pub biodiversity: u8,
    /// Derived as the OR of the three dimensions when absent.
    #[serde(default)]
    pub nature: Option<u8>,
}

impl LabeledSentence {
    pub fn nature(&self) -> u8 {
        self.nature
            .unwrap_or(self.water | self.forest | self.biodiversity)
    }

    fn validate(&self) -> Result<(), CaseStudyError> {
        for (field, value) in [
            ("water", self.water),
            ("forest", self.forest),
            ("biodiversity", self.biodiversity),
            ("nature", self.nature()),
        ] {
            if value > 1 {
                return Err(CaseStudyError::NonBinary {
                    sent_id: self.sent_id.clone(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub doc_id: String,
    pub company_id: String,
    pub year: i32,
    pub country: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimCounts {
    pub water: usize,
    pub forest: usize,
    pub biodiversity: usize,
    pub nature: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub water: f64,
    pub forest: f64,
    pub biodiversity: f64,
    pub nature: f64,
}

impl Exposure {
    pub const DIMENSIONS: [&'static str; 4] = ["water", "forest", "biodiversity", "nature"];

    pub fn values(&self) -> [f64; 4] {
        [self.water, self.forest, self.biodiversity, self.nature]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Exposure {
            water: v[0],
            forest: v[1],
            biodiversity: v[2],
            nature: v[3],
        }
    }

    /// Unweighted mean. Callers pass values in a fixed order so the float sum
    /// is reproducible.
    pub fn mean<'a, I: IntoIterator<Item = &'a Exposure>>(items: I) -> Option<Exposure> {
        let mut sum = [0.0; 4];
        let mut n = 0usize;
        for e in items {
            for (s, v) in sum.iter_mut().zip(e.values()) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| Exposure::from_values(sum.map(|s| s / n as f64)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptScore {
    pub doc_id: String,
    pub company_id: String,
    pub year: i32,
    pub country: String,
    pub counts: DimCounts,
    pub total_sentences: usize,
    pub exposure: Exposure,
}

impl TranscriptScore {
    /// Nature count is at least each dimension count; holds when nature is
    /// the OR of the dimensions.
    pub fn is_monotone(&self) -> bool {
        let c = self.counts;
        c.nature >= c.water.max(c.forest).max(c.biodiversity)
    }
}

/// Counts positive sentences per dimension and divides by the sentence total.
pub fn score_transcript(
    meta: &TranscriptMeta,
    sentences: &[LabeledSentence],
) -> Result<TranscriptScore, CaseStudyError> {
    if sentences.is_empty() {
        return Err(CaseStudyError::EmptyTranscript(meta.doc_id.clone()));
    }
    let mut c = DimCounts::default();
    for s in sentences {
        s.validate()?;
        c.water += usize::from(s.water);
        c.forest += usize::from(s.forest);
        c.biodiversity += usize::from(s.biodiversity);
        c.nature += usize::from(s.nature());
    }
    let n = sentences.len() as f64;
    Ok(TranscriptScore {
        doc_id: meta.doc_id.clone(),
        company_id: meta.company_id.clone(),
        year: meta.year,
        country: meta.country.clone(),
        counts: c,
        total_sentences: sentences.len(),
        exposure: Exposure {
            water: c.water as f64 / n,
            forest: c.forest as f64 / n,
            biodiversity: c.biodiversity as f64 / n,
            nature: c.nature as f64 / n,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyExposure {
    pub company_id: String,
    pub year: i32,
    pub n_calls: usize,
    pub exposure: Exposure,
}

/// Mean transcript exposure per (company, year), sorted by company then year.
pub fn company_yearly_exposure(scores: &[TranscriptScore]) -> Result<Vec<CompanyExposure>, CaseStudyError> {
    if scores.is_empty() {
        return Err(CaseStudyError::EmptyGroup("no transcripts".into()));
    }
    let mut groups: BTreeMap<(&str, i32), BTreeMap<&str, &Exposure>> = BTreeMap::new();
    for s in scores {
        groups
            .entry((&s.company_id, s.year))
            .or_default()
            .insert(&s.doc_id, &s.exposure);
    }
    Ok(groups
        .into_iter()
        .map(|((company, year), calls)| CompanyExposure {
            company_id: company.to_string(),
            year,
            n_calls: calls.len(),
            exposure: Exposure::mean(calls.values().copied()).expect("non-empty group"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryExposure {
    pub rank: usize,
    pub industry: u8,
    pub n_companies: usize,
    pub exposure: Exposure,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub stage: String,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryTable {
    /// Every covered industry, ranked.
    pub rows: Vec<IndustryExposure>,
    pub excluded: Vec<Exclusion>,
}

impl IndustryTable {
    pub fn top(&self, n: usize) -> &[IndustryExposure] {
        &self.rows[..n.min(self.rows.len())]
    }
}

pub const DEFAULT_TOP_N: usize = 20;

/// Averages company exposures per industry and ranks industries by nature
/// exposure (highest first, ties to the lower code).
///
/// A company observed in several years first gets the mean of its yearly
/// values, so each company counts once. Companies absent from the map are
/// listed in `excluded`.
pub fn industry_aggregate(
    companies: &[CompanyExposure],
    industry_map: &BTreeMap<String, u8>,
) -> Result<IndustryTable, CaseStudyError> {
    let mut per_company: BTreeMap<&str, BTreeMap<i32, &Exposure>> = BTreeMap::new();
    for c in companies {
        per_company
            .entry(&c.company_id)
            .or_default()
            .insert(c.year, &c.exposure);
    }
    let mut industries: BTreeMap<u8, BTreeMap<&str, Exposure>> = BTreeMap::new();
    let mut excluded = Vec::new();
    for (company, years) in per_company {
        let mean = Exposure::mean(years.values().copied()).expect("non-empty");
        match industry_map.get(company) {
            Some(&code) => {
                industries.entry(code).or_default().insert(company, mean);
            }
            None => excluded.push(Exclusion {
                stage: "industry".into(),
                id: company.to_string(),
                reason: "company has no industry code".into(),
            }),
        }
    }
    if industries.is_empty() {
        return Err(CaseStudyError::EmptyCoverage("industries"));
    }
    let mut rows: Vec<IndustryExposure> = industries
        .into_iter()
        .map(|(code, members)| IndustryExposure {
            rank: 0,
            industry: code,
            n_companies: members.len(),
            exposure: Exposure::mean(members.values()).expect("non-empty"),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.exposure
            .nature
            .total_cmp(&a.exposure.nature)
            .then(a.industry.cmp(&b.industry))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(IndustryTable { rows, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryMentionRate {
    pub country: String,
    pub transcripts: usize,
    pub mentioning: usize,
    pub rate: f64,
}

/// Share of calls per country with at least one nature-positive sentence,
/// sorted by country.
pub fn country_mention_rate(scores: &[TranscriptScore]) -> Result<Vec<CountryMentionRate>, CaseStudyError> {
    if scores.is_empty() {
        return Err(CaseStudyError::EmptyCoverage("transcripts"));
    }
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in scores {
        let e = per.entry(&s.country).or_default();
        e.0 += 1;
        e.1 += usize::from(s.counts.nature >= 1);
    }
    Ok(per
        .into_iter()
        .map(|(country, (n, m))| CountryMentionRate {
            country: country.to_string(),
            transcripts: n,
            mentioning: m,
            rate: m as f64 / n as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub transcripts: Vec<TranscriptScore>,
    pub companies: Vec<CompanyExposure>,
    pub industries: IndustryTable,
    pub countries: Vec<CountryMentionRate>,
    /// Transcripts and companies left out, with the reason.
    pub excluded: Vec<Exclusion>,
    pub top_n: usize,
}

/// Runs the whole aggregation. Transcripts without metadata and metadata
/// rows without sentences go to the exclusion list.
pub fn run_case_study(
    sentences: &[LabeledSentence],
    metadata: &[TranscriptMeta],
    industry_map: &BTreeMap<String, u8>,
    top_n: usize,
) -> Result<CaseStudyReport, CaseStudyError> {
    let mut by_doc: BTreeMap<&str, BTreeMap<&str, &LabeledSentence>> = BTreeMap::new();
    for s in sentences {
        if by_doc
            .entry(&s.doc_id)
            .or_default()
            .insert(&s.sent_id, s)
            .is_some()
        {
            return Err(CaseStudyError::Duplicate {
                kind: "sentence",
                id: s.sent_id.clone(),
            });
        }
    }
    let mut meta: BTreeMap<&str, &TranscriptMeta> = BTreeMap::new();
    for m in metadata {
        if meta.insert(&m.doc_id, m).is_some() {
            return Err(CaseStudyError::Duplicate {
                kind: "transcript metadata",
                id: m.doc_id.clone(),
            });
        }
    }
    let mut excluded = Vec::new();
    let mut transcripts = Vec::new();
    for (doc, sents) in &by_doc {
        match meta.get(doc) {
            Some(m) => {
                let list: Vec<LabeledSentence> = sents.values().map(|s| (*s).clone()).collect();
                transcripts.push(score_transcript(m, &list)?);
            }
            None => excluded.push(Exclusion {
                stage: "transcript".into(),
                id: doc.to_string(),
                reason: "no transcript metadata".into(),
            }),
        }
    }
    for doc in meta.keys() {
        if !by_doc.contains_key(doc) {
            excluded.push(Exclusion {
                stage: "transcript".into(),
                id: doc.to_string(),
                reason: "no labeled sentences".into(),
            });
        }
    }
    if transcripts.is_empty() {
        return Err(CaseStudyError::EmptyCoverage("transcripts"));
    }
    let companies = company_yearly_exposure(&transcripts)?;
    let mut industries = industry_aggregate(&companies, industry_map)?;
    let countries = country_mention_rate(&transcripts)?;
    excluded.append(&mut industries.excluded.clone());
    excluded.sort();
    industries.excluded.sort();
    Ok(CaseStudyReport {
        transcripts,
        companies,
        industries,
        countries,
        excluded,
        top_n,
    })
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_string<R: AsRef<[u8]>>(header: &[&str], rows: impl IntoIterator<Item = Vec<R>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

impl CaseStudyReport {
    pub fn transcripts_csv(&self) -> String {
        csv_string(
            &[
                "doc_id", "company_id", "year", "country", "total_sentences", "water_count",
                "forest_count", "biodiversity_count", "nature_count", "water", "forest",
                "biodiversity", "nature",
            ],
            self.transcripts.iter().map(|t| {
                let mut row = vec![
                    t.doc_id.clone(),
                    t.company_id.clone(),
                    t.year.to_string(),
                    t.country.clone(),
                    t.total_sentences.to_string(),
                    t.counts.water.to_string(),
                    t.counts.forest.to_string(),
                    t.counts.biodiversity.to_string(),
                    t.counts.nature.to_string(),
                ];
                row.extend(t.exposure.values().map(f));
                row
            }),
        )
    }

    pub fn companies_csv(&self) -> String {
        csv_string(
            &["company_id", "year", "n_calls", "water", "forest", "biodiversity", "nature"],
            self.companies.iter().map(|c| {
                let mut row = vec![c.company_id.clone(), c.year.to_string(), c.n_calls.to_string()];
                row.extend(c.exposure.values().map(f));
                row
            }),
        )
    }

    /// The top-N industry view.
    pub fn industries_csv(&self) -> String {
        csv_string(
            &["rank", "ff49", "n_companies", "water", "forest", "biodiversity", "nature"],
            self.industries.top(self.top_n).iter().map(|r| {
                let mut row = vec![r.rank.to_string(), r.industry.to_string(), r.n_companies.to_string()];
                row.extend(r.exposure.values().map(f));
                row
            }),
        )
    }

    pub fn countries_csv(&self) -> String {
        csv_string(
            &["country", "transcripts", "mentioning", "rate"],
            self.countries.iter().map(|c| {
                vec![
                    c.country.clone(),
                    c.transcripts.to_string(),
                    c.mentioning.to_string(),
                    f(c.rate),
                ]
            }),
        )
    }

    pub fn excluded_csv(&self) -> String {
        csv_string(
            &["stage", "id", "reason"],
            self.excluded
                .iter()
                .map(|e| vec![e.stage.clone(), e.id.clone(), e.reason.clone()]),
        )
    }

    /// Long format for plotting: `figure,group,dimension,value`.
    pub fn plot_csv(&self) -> String {
        let mut rows = Vec::new();
        for r in self.industries.top(self.top_n) {
            for (d, v) in Exposure::DIMENSIONS.iter().zip(r.exposure.values()) {
                rows.push(vec![
                    "industry".to_string(),
                    r.industry.to_string(),
                    d.to_string(),
                    f(v),
                ]);
            }
        }
        for c in &self.countries {
            rows.push(vec![
                "country".to_string(),
                c.country.clone(),
                "nature".to_string(),
                f(c.rate),
            ]);
        }
        csv_string(&["figure", "group", "dimension", "value"], rows)
    }

    /// Aligned text of the top-N industries.
    pub fn industries_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:>4}  {:>9}  {:>8}", "rank", "ff49", "companies", "nature");
        for r in self.industries.top(self.top_n) {
            let _ = writeln!(
                out,
                "{:>4}  {:>4}  {:>9}  {:>8.4}",
                r.rank, r.industry, r.n_companies, r.exposure.nature
            );
        }
        out
    }

    /// Writes every table into `dir` and returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CaseStudyError> {
        fs::create_dir_all(dir).map_err(|source| CaseStudyError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let files = [
            ("transcripts.csv", self.transcripts_csv()),
            ("companies.csv", self.companies_csv()),
            ("industries.csv", self.industries_csv()),
            ("countries.csv", self.countries_csv()),
            ("excluded.csv", self.excluded_csv()),
            ("plot.csv", self.plot_csv()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| CaseStudyError::Write {
                path: path.clone(),
                source,
            })?;
            out.push(path);
        }
        Ok(out)
    }
}

fn input_err(path: &Path, reason: impl ToString) -> CaseStudyError {
    CaseStudyError::Input {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

pub fn load_labeled_sentences(path: &Path) -> Result<Vec<LabeledSentence>, CaseStudyError> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| input_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn load_metadata(path: &Path) -> Result<Vec<TranscriptMeta>, CaseStudyError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| input_err(path, e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| input_err(path, e))
}

/// Reads `company_id,ff49` rows; the code column may also be named
/// `industry` or `code`.
pub fn load_industry_map(path: &Path) -> Result<BTreeMap<String, u8>, CaseStudyError> {
    #[derive(Deserialize)]
    struct Row {
        company_id: String,
        #[serde(alias = "industry", alias = "code")]
        ff49: u8,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| input_err(path, e))?;
    let mut map = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for row in r.deserialize() {
        let row: Row = row.map_err(|e| input_err(path, e))?;
        if !(1..=49).contains(&row.ff49) {
            return Err(input_err(path, format!("industry code {} outside 1-49", row.ff49)));
        }
        if !seen.insert(row.company_id.clone()) {
            return Err(CaseStudyError::Duplicate {
                kind: "company",
                id: row.company_id,
            });
        }
        map.insert(row.company_id, row.ff49);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(doc: &str, company: &str, year: i32, country: &str) -> TranscriptMeta {
        TranscriptMeta {
            doc_id: doc.into(),
            company_id: company.into(),
            year,
            country: country.into(),
        }
    }

    fn sents(doc: &str, n: usize, nature_pos: usize) -> Vec<LabeledSentence> {
        (0..n)
            .map(|i| LabeledSentence {
                doc_id: doc.into(),
                sent_id: format!("{doc}:{i}"),
                water: u8::from(i < nature_pos),
                forest: 0,
                biodiversity: 0,
                nature: None,
            })
            .collect()
    }

    fn score(doc: &str, company: &str, year: i32, nature: f64) -> TranscriptScore {
        TranscriptScore {
            doc_id: doc.into(),
            company_id: company.into(),
            year,
            country: "US".into(),
            counts: DimCounts::default(),
            total_sentences: 1,
            exposure: Exposure {
                nature,
                ..Exposure::default()
            },
        }
    }

    #[test]
    fn ratio() {
        let t = score_transcript(&meta("d", "c", 2020, "US"), &sents("d", 50, 2)).unwrap();
        assert!((t.exposure.nature - 0.04).abs() < 1e-12);
        assert!(t.is_monotone());
        let t = score_transcript(&meta("d", "c", 2020, "US"), &sents("d", 5, 0)).unwrap();
        assert_eq!(t.exposure, Exposure::default());
        assert!(score_transcript(&meta("d", "c", 2020, "US"), &[]).is_err());
    }

    #[test]
    fn company_mean() {
        let c = company_yearly_exposure(&[score("a", "c", 2020, 0.04), score("b", "c", 2020, 0.06)]).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].exposure.nature - 0.05).abs() < 1e-12);
        assert_eq!(c[0].n_calls, 2);
    }

    #[test]
    fn ranking_and_ties() {
        let comp = |id: &str, v: f64| CompanyExposure {
            company_id: id.into(),
            year: 2020,
            n_calls: 1,
            exposure: Exposure {
                nature: v,
                ..Exposure::default()
            },
        };
        let map: BTreeMap<String, u8> =
            [("x".to_string(), 30), ("y".to_string(), 7), ("z".to_string(), 12)].into();
        let t = industry_aggregate(
            &[comp("x", 0.02), comp("y", 0.01), comp("z", 0.02), comp("q", 0.5)],
            &map,
        )
        .unwrap();
        let order: Vec<u8> = t.rows.iter().map(|r| r.industry).collect();
        assert_eq!(order, vec![12, 30, 7]);
        assert_eq!(t.rows[0].rank, 1);
        assert_eq!(t.excluded[0].id, "q");
        assert_eq!(t.top(1).len(), 1);
    }

    #[test]
    fn country_rates() {
        let mut scores = Vec::new();
        for (i, pos) in [1usize, 2, 0, 5].iter().enumerate() {
            let mut s = score(&format!("d{i}"), "c", 2020, 0.0);
            s.counts.nature = *pos;
            scores.push(s);
        }
        let mut s = score("z", "c", 2020, 0.0);
        s.country = "DE".into();
        scores.push(s);
        let r = country_mention_rate(&scores).unwrap();
        assert_eq!(r[0].country, "DE");
        assert_eq!(r[0].rate, 0.0);
        assert_eq!(r[1].rate, 0.75);
    }

    #[test]
    fn every_transcript_accounted_for() {
        let mut s = sents("a", 4, 1);
        s.extend(sents("orphan", 2, 0));
        let m = vec![meta("a", "c1", 2021, "US"), meta("silent", "c2", 2021, "US")];
        let map: BTreeMap<String, u8> = [("c1".to_string(), 1)].into();
        let r = run_case_study(&s, &m, &map, DEFAULT_TOP_N).unwrap();
        assert_eq!(r.transcripts.len(), 1);
        let ids: Vec<&str> = r.excluded.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["orphan", "silent"]);
    }
}
