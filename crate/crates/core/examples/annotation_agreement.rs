//! Four annotators label three sentences; one 2-2 split is adjudicated,
//! agreement is reported and the gold set exported.
//!
//!     cargo run --example annotation_agreement

use nature_disclosure::annotation::{AnnotationRecord, AnnotationStore, Task};
use nature_disclosure::keywords::Dimension;

fn main() {
    let tasks = vec![
        Task { sample_id: "s1".into(), text: "We cut water withdrawal by 10%.".into() },
        Task { sample_id: "s2".into(), text: "Mangrove restoration protects coastal species.".into() },
        Task { sample_id: "s3".into(), text: "Our CFO joined in March.".into() },
    ];
    let annotators = ["ann", "ben", "cat", "dan"];
    let store = AnnotationStore::new(tasks, &annotators).unwrap();
    // (water, forest, biodiversity) per annotator and sample
    let votes = [
        ("s1", [(1, 0, 0), (1, 0, 0), (1, 0, 0), (1, 0, 0)]),
        ("s2", [(0, 1, 1), (0, 0, 1), (0, 1, 1), (0, 0, 1)]),
        ("s3", [(0, 0, 0); 4]),
    ];
    for (sample, per) in votes {
        for (who, (w, f, b)) in annotators.iter().zip(per) {
            store.submit_annotation(AnnotationRecord::new(sample, who, w, f, b)).unwrap();
        }
    }
    println!("export before adjudication: {}", store.export_gold().unwrap_err());
    for p in store.adjudication_queue() {
        println!("split on {} / {}: {:?}", p.sample_id, p.dimension.as_str(), p.votes);
    }
    store.resolve_adjudication("s2", Dimension::Forest, 1, "lead").unwrap();

    let report = store.agreement().unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    let export = store.export_gold().unwrap();
    for s in &export.samples {
        println!("{} water={} forest={} biodiversity={} nature={} ({:?})", s.sample_id, s.water, s.forest, s.biodiversity, s.nature, s.resolution);
    }
    println!("distribution: {:?}", export.distribution);
}
