//! The full training chain from a corpus and reading sessions to a model.

use thiserror::Error;

use crate::anchors::{build_dictionary, AnchorDictionary, DictionaryConfig};
use crate::corpus::Corpus;
use crate::embeddings::{
    train_content_embeddings, train_navigation_embeddings, EmbeddingError, EmbeddingStore,
    ReadingSession, SgnsParams,
};
use crate::eval::{build_gold, EvalError, GoldConfig, GoldSet};
use crate::features::FeatureExtractor;
use crate::linker::Scorer;
use crate::model::{
    self, generate_training_data, BoostParams, InstanceOptions, LinkModel, ModelError,
    TrainingInstance,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub dictionary: DictionaryConfig,
    pub content: SgnsParams,
    pub navigation: SgnsParams,
    pub gold: GoldConfig,
    pub instances: InstanceOptions,
    pub boost: BoostParams,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct Artifacts<T> {
    pub dict: AnchorDictionary,
    pub content: EmbeddingStore<T>,
    /// Keyed by title.
    pub navigation: EmbeddingStore<T>,
    pub gold: GoldSet,
    pub instances: Vec<TrainingInstance<T>>,
    pub model: LinkModel<T>,
}

impl<T: Scalar> Artifacts<T> {
    pub fn extractor(&self) -> FeatureExtractor<'_, T> {
        FeatureExtractor::new(&self.dict, Some(&self.content), Some(&self.navigation))
    }

    pub fn scorer(&self) -> Scorer<'_, T> {
        Scorer::new(self.extractor(), &self.model)
    }
}

/// Navigation vectors trained on entity ids and re-keyed by title.
pub fn navigation_by_title<T: Scalar>(
    corpus: &Corpus,
    sessions: &[ReadingSession],
    params: &SgnsParams,
) -> Result<EmbeddingStore<T>, EmbeddingError> {
    let by_id = train_navigation_embeddings::<T>(sessions, params)?;
    Ok(by_id.reverse_map(&corpus.entity_ids()))
}

/// Builds the dictionary, both embedding stores and the gold set, then
/// trains the classifier on the training split.
pub fn run_pipeline<T: Scalar>(
    corpus: &Corpus,
    sessions: &[ReadingSession],
    config: &PipelineConfig,
) -> Result<Artifacts<T>, PipelineError> {
    let dict = build_dictionary(corpus, &config.dictionary);
    let content = train_content_embeddings::<T>(corpus, &config.content)?;
    let navigation = navigation_by_title(corpus, sessions, &config.navigation)?;
    let gold = build_gold(corpus, &config.gold)?;
    let extractor = FeatureExtractor::new(&dict, Some(&content), Some(&navigation));
    let instances = generate_training_data(&gold.train, &extractor, &config.instances);
    let model = model::train(&instances, &config.boost, Some(corpus.fingerprint()))?;
    Ok(Artifacts {
        dict,
        content,
        navigation,
        gold,
        instances,
        model,
    })
}
