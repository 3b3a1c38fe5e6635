//! Count keyword hits, split patterns into frequency buckets and draw a
//! bucket-balanced sample.
//!
//!     cargo run --example keyword_buckets

use nature_disclosure::corpus::{CorpusStore, SourceKind};
use nature_disclosure::keywords::{
    bucket_balanced_sample, bucketize, keyword_frequency_table, Dimension, KeywordSet,
    DEFAULT_CUT_POINTS,
};
use nature_disclosure::Sentence;

const TEXTS: &[&str] = &[
    "Water consumption at our sites fell by 8%.",
    "We treat all wastewater before discharge.",
    "The lake near the plant is monitored monthly.",
    "Groundwater levels are stable.",
    "Flood risk was assessed for coastal assets.",
    "Our water stewardship program covers 12 basins.",
    "Revenue grew in all regions.",
    "Drought reduced hydropower output.",
    "Rainfall patterns shifted in the region.",
    "Ocean plastics are collected by partners.",
    "We reuse process water in cooling towers.",
    "Irrigation efficiency improved on supplier farms.",
];

fn main() {
    let mut store = CorpusStore::new();
    for (i, t) in TEXTS.iter().enumerate() {
        store
            .add_sentence(Sentence::new("demo", i, t), Some(SourceKind::SustainabilityReport))
            .unwrap();
    }
    let set = KeywordSet::builtin(Dimension::Water);
    let table = keyword_frequency_table(&store, &set).unwrap();
    println!("appearance rate {:.2}", table.appearance_rate());
    let assignment = bucketize(&table, &DEFAULT_CUT_POINTS).unwrap();
    for (p, c) in table.patterns.iter().zip(&table.counts).filter(|(_, c)| **c > 0) {
        println!("{p:?}: {c} (bucket {})", assignment.bucket_of(p).unwrap());
    }
    // one sentence per bucket
    match bucket_balanced_sample(&store, &set, &assignment, assignment.bucket_count(), 42) {
        Ok(sample) => {
            for (bucket, s) in sample.sentences() {
                println!("bucket {bucket}: {}", s.text);
            }
        }
        Err(e) => println!("sample not possible on this toy corpus: {e}"),
    }
}
