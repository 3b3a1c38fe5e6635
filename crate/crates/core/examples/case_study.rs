//! Earnings-call exposure by company-year, industry and country on the
//! bundled three-company fixture.
//!
//!     cargo run --example case_study

use std::path::Path;

use nature_disclosure::casestudy::{
    load_industry_map, load_labeled_sentences, load_metadata, run_case_study,
};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/casestudy");
    let sentences = load_labeled_sentences(&dir.join("labels.jsonl")).unwrap();
    let metadata = load_metadata(&dir.join("metadata.csv")).unwrap();
    let map = load_industry_map(&dir.join("industry_map.csv")).unwrap();
    let report = run_case_study(&sentences, &metadata, &map, 10).unwrap();
    print!("{}", report.companies_csv());
    print!("{}", report.industries_text());
    print!("{}", report.countries_csv());
}
