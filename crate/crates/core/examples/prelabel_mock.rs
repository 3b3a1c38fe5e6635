//! Pre-label sentences with the offline mock scorer, then draw an equal
//! number from each score band.
//!
//!     cargo run --example prelabel_mock

use nature_disclosure::guidelines::Guidelines;
use nature_disclosure::keywords::{Dimension, KeywordSet};
use nature_disclosure::prelabel::{band_balanced_sample, prelabel_batch, BatchOptions, MockBackend};
use nature_disclosure::Sentence;

fn main() {
    let texts = [
        "Deforestation in our cocoa supply chain fell to zero.",
        "We planted 40,000 trees across forest restoration sites.",
        "Timber and wood products are FSC certified.",
        "Operating margin improved to 12%.",
        "Our board met eight times.",
        "Forest fires disrupted logistics in August.",
    ];
    let sentences: Vec<Sentence> = texts.iter().enumerate().map(|(i, t)| Sentence::new("demo", i, t)).collect();
    let dimension = Dimension::Forest;
    let guideline = Guidelines::builtin().get(dimension).prompt_text();
    let backend = MockBackend::new(KeywordSet::builtin(dimension));
    let outcome = prelabel_batch(&sentences, dimension, &guideline, &backend, &BatchOptions::default(), None).unwrap();
    for (s, score) in sentences.iter().zip(&outcome.scores) {
        println!("{:>3} {:?}  {}", score.effective_score, score.band(), s.text);
    }
    let picked = band_balanced_sample(&outcome.scores, 3, 7).unwrap();
    println!("band sample: {picked:?}");
}
