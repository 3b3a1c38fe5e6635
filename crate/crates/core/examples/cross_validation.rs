//! Five-fold cross-validation of the keyword baseline and two constant
//! predictors, rendered as a comparison table.
//!
//!     cargo run --example cross_validation

use std::path::Path;

use nature_disclosure::baseline::{BaselineRunner, TwoLayerRule};
use nature_disclosure::dataset::{GoldDataset, Target};
use nature_disclosure::eval::{cross_validate, make_folds, results_table, ConstantRunner, MetricKind};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/gold_200.csv");
    let ds = GoldDataset::load(&path).unwrap();
    let folds = make_folds(&ds, Target::Nature, 5, 42).unwrap();
    let mut baseline = BaselineRunner { rule: TwoLayerRule::builtin() };
    let reports = vec![
        cross_validate(&mut baseline, &ds, &folds, "").unwrap(),
        cross_validate(&mut ConstantRunner(1), &ds, &folds, "").unwrap(),
        cross_validate(&mut ConstantRunner(0), &ds, &folds, "").unwrap(),
    ];
    print!("{}", results_table(&reports, MetricKind::F1).to_text());
}
