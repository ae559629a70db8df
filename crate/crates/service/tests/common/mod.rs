#![allow(dead_code)]

use std::sync::Arc;

use anchorlink::anchors::{build_dictionary, AnchorDictionary, DictionaryConfig};
use anchorlink::features::FeatureExtractor;
use anchorlink::linker::LinkerConfig;
use anchorlink::model::gbdt::{Node, Tree};
use anchorlink::model::{BoostParams, Booster, TrainingMetadata};
use anchorlink::{Article, Corpus, LinkModel, Scorer};
use anchorlink_service::{ServiceConfig, ServicePaths, ServiceState};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub corpus: Corpus,
    pub dict: AnchorDictionary,
    pub model: LinkModel,
}

pub fn articles() -> Vec<Article> {
    vec![
        Article::content(
            "Q1",
            "Hub",
            "en",
            "[[Chicago]]. [[Chicago]]. [[Chicago]]. [[Paris]]. [[Paris]]. [[Paris]]. \
             [[Paris (Texas)|Paris]]. [[Lyon]].",
        ),
        Article::content("Q2", "Chicago", "en", ""),
        Article::content("Q3", "Paris", "en", ""),
        Article::content("Q4", "Paris (Texas)", "en", ""),
        Article::content("Q5", "Lyon", "en", ""),
        Article::content(
            "Q6",
            "Trip",
            "en",
            "We met in Chicago, then Paris and Lyon.",
        ),
        Article::content("Q7", "Notes", "en", "Chicago again."),
        Article::content("Q8", "Story", "en", "Paris was calm."),
        Article::content("Q9", "Empty", "en", "Nothing here."),
    ]
}

/// Every candidate gets sigmoid(2).
pub fn flat_model() -> LinkModel {
    LinkModel::from_booster(
        Booster {
            n_inputs: 9,
            base_margin: 0.0,
            trees: vec![Tree {
                nodes: vec![Node::Leaf { value: 2.0 }],
            }],
        },
        BoostParams::default(),
        TrainingMetadata {
            corpus_fingerprint: None,
            trained_at_unix: 0,
            instances: 0,
            positives: 0,
        },
    )
}

impl Fixture {
    pub fn new() -> Self {
        let corpus = Corpus::from_articles(articles()).unwrap();
        let dict = build_dictionary(&corpus, &DictionaryConfig::default());
        Fixture {
            dir: tempfile::tempdir().unwrap(),
            corpus,
            dict,
            model: flat_model(),
        }
    }

    pub fn scorer(&self) -> Scorer<'_> {
        Scorer::new(FeatureExtractor::new(&self.dict, None, None), &self.model)
    }

    pub fn paths(&self) -> ServicePaths {
        ServicePaths::in_dir(self.dir.path().join("batches"))
    }

    pub fn open(&self) -> Arc<ServiceState> {
        Arc::new(ServiceState::open(&self.corpus, self.paths(), ServiceConfig::default()).unwrap())
    }

    /// A state with freshly generated batches.
    pub fn serving(&self) -> Arc<ServiceState> {
        let state = self.open();
        state
            .regenerate(&self.corpus, &self.scorer(), &LinkerConfig::default())
            .unwrap();
        state
    }
}
