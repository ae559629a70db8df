//! Entity linking against an anchor dictionary mined from a wiki corpus.
//!
//! The pipeline reads a WikiLite corpus, builds the anchor dictionary,
//! trains content and navigation embeddings, fits a boosted-tree classifier
//! on gold sentences and recommends new links for article text.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`.

pub mod anchors;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod features;
pub mod linker;
pub mod mentions;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod span;
pub mod synth;

pub use anchors::{build_dictionary, normalize_mention, AnchorDictionary, DictionaryConfig};
pub use corpus::{load_corpus, text_digest, Article, Corpus};
pub use linker::{apply_edit, LinkerConfig};
pub use scalar::Scalar;
pub use span::Span;

pub type EmbeddingStore = embeddings::EmbeddingStore<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureExtractor<'a> = features::FeatureExtractor<'a, f64>;
pub type LinkModel = model::LinkModel<f64>;
pub type TrainingInstance = model::TrainingInstance<f64>;
pub type Recommendation = linker::Recommendation<f64>;
pub type Scorer<'a> = linker::Scorer<'a, f64>;
