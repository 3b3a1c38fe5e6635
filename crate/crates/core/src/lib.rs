//! Corpus analytics for corporate nature disclosure.
//!
//! The crate covers the whole data-creation and evaluation pipeline for
//! detecting water, forest and biodiversity communication in company
//! disclosures:
//!
//! * [`corpus`]: document ingestion, rule-based sentence segmentation and
//!   sentence-length statistics.
//! * [`keywords`]: stem-prefix keyword dictionaries, a multi-pattern matcher,
//!   corpus frequency tables and the five-bucket balanced sampler.
//! * [`prelabel`]: the LLM pre-labeling prompt, response parsing, a pluggable
//!   scoring backend and score-band balanced sampling.
//! * [`annotation`]: per-annotator label storage, majority aggregation with
//!   adjudication, Fleiss' kappa and the HTTP API used by the annotation UI.
//! * [`baseline`]: the two-layer biodiversity keyword classifier.
//! * [`eval`]: binary metrics, stratified folds, cross-validation reports and
//!   comparison tables.
//! * [`casestudy`]: earnings-call exposure aggregation by company, industry
//!   and country.
//! * [`cli`]: the `naturectl` command line front end.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory (`cargo run -p nature-disclosure --example <name>`).

pub mod annotation;
pub mod baseline;
pub mod casestudy;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod guidelines;
pub mod keywords;
pub mod prelabel;
pub(crate) mod sampling;

pub use corpus::{CorpusStore, Document, Sentence, SentenceStats, SourceKind};
pub use dataset::{GoldDataset, GoldRecord, Target};
pub use keywords::{Dimension, KeywordSet, Matcher};
