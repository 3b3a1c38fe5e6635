//! Segment two documents into sentences and print length statistics.
//!
//!     cargo run --example segment_corpus

use std::collections::BTreeMap;

use nature_disclosure::corpus::{corpus_stats, CorpusStore, Document, SourceKind};

fn main() {
    let mut store = CorpusStore::new();
    let docs = [
        ("ar-2021", SourceKind::AnnualReport, "Net sales rose 4% to EUR 2.1 bn. We sourced 98% of our soy from verified deforestation-free suppliers. Water withdrawal fell at three plants, e.g. in Spain."),
        ("ec-q3", SourceKind::EarningsCall, "Good morning, everyone. Drought in the Rhine basin lowered barge capacity! Any questions?"),
    ];
    for (id, kind, text) in docs {
        store
            .add_document(Document {
                doc_id: id.into(),
                source_kind: kind,
                text: text.into(),
                meta: BTreeMap::new(),
            })
            .expect("unique doc ids");
    }
    for s in store.sentences() {
        println!("{:<12} {:>2} tokens  {}", s.sent_id, s.token_count, s.text);
    }
    for kind in [None, Some(SourceKind::AnnualReport), Some(SourceKind::EarningsCall)] {
        let stats = corpus_stats(&store, kind).unwrap();
        let scope = kind.map_or("all", |k| k.code());
        println!("{scope}: n={} mean={:.2} median={}", stats.count, stats.mean, stats.p50);
    }
}
