//! Two-layer biodiversity keyword classifier.
//!
//! A sentence is positive when it contains one *specific* keyword and one
//! *additional* keyword. The additional keywords of all groups (ecosystem,
//! marine, tropical, species) are pooled. A keyword listed in both layers can
//! only satisfy both through two different occurrences, so a lone
//! "biodiversity" is not enough. Matching uses the same space-padded,
//! case-insensitive substring rule as [`crate::keywords`].

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{DatasetError, GoldDataset, GoldRecord, Target};
use crate::eval::{Confusion, Metrics, PredictionRunner, RunnerError};
use crate::keywords::{parse_pattern_lines, Matcher};

const TWO_LAYER_V1: &str = include_str!("../resources/baseline/two_layer.v1.txt");

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("rule resource line {line}: {reason}")]
    Resource { line: usize, reason: String },
    #[error("rule has an empty {0} layer")]
    EmptyLayer(&'static str),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("gold dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone)]
pub struct TwoLayerRule {
    specific: Matcher,
    additional: Matcher,
    /// Group name of every additional pattern.
    groups: Vec<String>,
}

impl TwoLayerRule {
    pub fn new<S: AsRef<str>>(specific: &[S], additional: &[S]) -> Result<Self, BaselineError> {
        if specific.is_empty() {
            return Err(BaselineError::EmptyLayer("specific"));
        }
        if additional.is_empty() {
            return Err(BaselineError::EmptyLayer("additional"));
        }
        Ok(TwoLayerRule {
            specific: Matcher::new(specific),
            additional: Matcher::new(additional),
            groups: vec!["additional".into(); additional.len()],
        })
    }

    /// Parses a rule resource with a `[specific]` section and one or more
    /// `[additional:<group>]` sections. Additional patterns are pooled and
    /// de-duplicated in listing order.
    pub fn from_resource(text: &str) -> Result<Self, BaselineError> {
        let mut specific: Vec<String> = Vec::new();
        let mut additional: Vec<String> = Vec::new();
        let mut groups: Vec<String> = Vec::new();
        let mut section: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(name.to_string());
                continue;
            }
            let pattern = parse_pattern_lines(line)
                .map_err(|e| BaselineError::Resource {
                    line: i + 1,
                    reason: e.to_string(),
                })?
                .pop()
                .unwrap_or_default();
            match section.as_deref() {
                Some("specific") => {
                    if !specific.contains(&pattern) {
                        specific.push(pattern);
                    }
                }
                Some(s) if s.starts_with("additional") => {
                    if !additional.contains(&pattern) {
                        additional.push(pattern);
                        groups.push(s.strip_prefix("additional:").unwrap_or("").to_string());
                    }
                }
                _ => {
                    return Err(BaselineError::Resource {
                        line: i + 1,
                        reason: "pattern outside a [specific] or [additional:*] section".into(),
                    })
                }
            }
        }
        let mut rule = Self::new(&specific, &additional)?;
        rule.groups = groups;
        Ok(rule)
    }

    /// The bundled rule: 21 specific keywords and the pooled additional lists.
    pub fn builtin() -> Self {
        Self::from_resource(TWO_LAYER_V1).expect("bundled two-layer rule")
    }

    pub fn specific_patterns(&self) -> &[String] {
        self.specific.patterns()
    }

    pub fn additional_patterns(&self) -> &[String] {
        self.additional.patterns()
    }

    pub fn additional_group(&self, index: usize) -> &str {
        &self.groups[index]
    }

    /// Explains a decision: the first (specific, additional) pair of distinct
    /// spans, if any.
    pub fn witness(&self, text: &str) -> Option<(String, String)> {
        let specific = self.specific.find(text);
        if specific.is_empty() {
            return None;
        }
        let additional = self.additional.find(text);
        specific.iter().find_map(|s| {
            additional
                .iter()
                .find(|a| (a.start, a.end) != (s.start, s.end))
                .map(|a| {
                    (
                        self.specific.patterns()[s.pattern].clone(),
                        self.additional.patterns()[a.pattern].clone(),
                    )
                })
        })
    }

    pub fn classify(&self, text: &str) -> u8 {
        u8::from(self.witness(text).is_some())
    }
}

/// 1 when `sentence` holds a specific and an additional keyword at distinct
/// spans.
pub fn classify_two_layer(sentence: &str, rule: &TwoLayerRule) -> u8 {
    rule.classify(sentence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Misclassified {
    pub sample_id: String,
    pub text: String,
    pub gold: u8,
    pub predicted: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub target: Target,
    pub samples: usize,
    pub metrics: Metrics,
    pub confusion: Confusion,
    pub false_positives: Vec<Misclassified>,
    pub false_negatives: Vec<Misclassified>,
}

/// Evaluates the rule on a gold dataset with `target` as the positive class.
///
/// Up to `examples` false positives and false negatives (ordered by sample
/// id) are kept for inspection.
pub fn evaluate_baseline(
    dataset: &GoldDataset,
    target: Target,
    rule: &TwoLayerRule,
    examples: usize,
) -> Result<BaselineReport, BaselineError> {
    let labels = dataset.labels(target)?;
    if labels.is_empty() {
        return Err(BaselineError::EmptyDataset);
    }
    let mut confusion = Confusion::default();
    let mut fps = Vec::new();
    let mut fns = Vec::new();
    for (record, &gold) in dataset.records.iter().zip(&labels) {
        let predicted = rule.classify(&record.text);
        confusion.add(predicted == 1, gold == 1);
        if predicted != gold {
            let m = Misclassified {
                sample_id: record.sample_id.clone(),
                text: record.text.clone(),
                gold,
                predicted,
            };
            if predicted == 1 {
                fps.push(m);
            } else {
                fns.push(m);
            }
        }
    }
    for list in [&mut fps, &mut fns] {
        list.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        list.truncate(examples);
    }
    Ok(BaselineReport {
        target,
        samples: labels.len(),
        metrics: confusion.metrics(),
        confusion,
        false_positives: fps,
        false_negatives: fns,
    })
}

/// The rule as a cross-validation runner; it ignores the training split.
#[derive(Debug, Clone)]
pub struct BaselineRunner {
    pub rule: TwoLayerRule,
}

impl PredictionRunner for BaselineRunner {
    fn model(&self) -> String {
        "two-layer-keywords".into()
    }

    fn predict(
        &mut self,
        _fold: usize,
        _train: &[&GoldRecord],
        test: &[&GoldRecord],
    ) -> Result<HashMap<String, u8>, RunnerError> {
        Ok(test
            .iter()
            .map(|r| (r.sample_id.clone(), self.rule.classify(&r.text)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rule_sizes() {
        let rule = TwoLayerRule::builtin();
        assert_eq!(rule.specific_patterns().len(), 21);
        // 8 + 5 + 5 + 14 listed, "marine" style overlaps are distinct strings,
        // nothing repeats across groups.
        assert_eq!(rule.additional_patterns().len(), 32);
        assert_eq!(rule.additional_group(0), "Ecosystem");
        assert!(rule.additional_patterns().contains(&"climate".to_string()));
        assert!(rule.additional_patterns().contains(&"EPA".to_string()));
    }

    #[test]
    fn forest_and_climate_is_positive() {
        let rule = TwoLayerRule::builtin();
        let s = "Together, our forests and products play an important role in mitigating climate change by limiting the amount of carbon dioxide that is released into the atmosphere each year";
        assert_eq!(classify_two_layer(s, &rule), 1);
        let (sp, add) = rule.witness(s).unwrap();
        assert_eq!(sp, "forest");
        assert!(add == "climate" || add == "forest");
    }

    #[test]
    fn specific_only_is_negative() {
        let rule = TwoLayerRule::builtin();
        assert_eq!(classify_two_layer("We love biodiversity.", &rule), 0);
        assert_eq!(classify_two_layer("Biodiversity and biodiversity.", &rule), 1);
    }

    #[test]
    fn additional_only_is_negative() {
        let rule = TwoLayerRule::builtin();
        assert_eq!(classify_two_layer("Climate and water matter.", &rule), 0);
    }

    #[test]
    fn hand_confusion() {
        let ds = GoldDataset::from_records(vec![
            GoldRecord::new("a", "Species are threatened.", 0, 0, 1),
            GoldRecord::new("b", "Forest climate pledge.", 0, 1, 0),
            GoldRecord::new("c", "Coral reefs bleach.", 0, 0, 1),
            GoldRecord::new("d", "Revenue grew.", 0, 0, 0),
        ]);
        let rep = evaluate_baseline(&ds, Target::Biodiversity, &TwoLayerRule::builtin(), 10).unwrap();
        assert_eq!(rep.confusion, Confusion { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(rep.false_positives[0].sample_id, "b");
        assert_eq!(rep.false_negatives[0].sample_id, "c");
        let rep = evaluate_baseline(&ds, Target::Nature, &TwoLayerRule::builtin(), 10).unwrap();
        assert_eq!(rep.confusion, Confusion { tp: 2, fp: 0, fn_: 1, tn: 1 });
    }

    #[test]
    fn resource_errors() {
        assert!(TwoLayerRule::from_resource("orphan\n").is_err());
        assert!(TwoLayerRule::from_resource("[specific]\nx\n").is_err());
    }
}
