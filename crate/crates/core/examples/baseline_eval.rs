//! Evaluate the two-layer keyword rule on the bundled 200-sentence gold set.
//!
//!     cargo run --example baseline_eval

use std::path::Path;

use nature_disclosure::baseline::{evaluate_baseline, TwoLayerRule};
use nature_disclosure::dataset::{GoldDataset, Target};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/gold_200.csv");
    let ds = GoldDataset::load(&path).unwrap();
    let rule = TwoLayerRule::builtin();
    for target in [Target::Biodiversity, Target::Nature] {
        let r = evaluate_baseline(&ds, target, &rule, 2).unwrap();
        let m = r.metrics;
        println!(
            "{:<13} F1 {:.4}  acc {:.4}  P {:.4}  R {:.4}",
            target.as_str(), m.f1, m.accuracy, m.precision, m.recall
        );
        for fp in &r.false_positives {
            println!("  false positive {}: {}", fp.sample_id, fp.text);
        }
    }
    let text = "Habitat loss threatens endangered species near the mine.";
    println!("{:?} -> {:?}", text, rule.witness(text));
}
