use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use anchorlink::corpus::{Article, Corpus, CorpusError};
use anchorlink::linker::{apply_edit, EditError, LinkerConfig};
use anchorlink::{text_digest, Recommendation, Scorer};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch::{generate_batches, BatchSet, BatchStore, ServedRecommendation};
use crate::feedback::{
    replay, Decision, FeedbackEvent, FeedbackLog, FeedbackState, FeedbackSubmission, LogError,
    ValidationError, DEFAULT_REASON,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub rejection_reasons: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            rejection_reasons: vec![DEFAULT_REASON.to_string()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServicePaths {
    pub batches: PathBuf,
    pub feedback_log: PathBuf,
    pub edit_log: PathBuf,
}

impl ServicePaths {
    /// Feedback and edit logs placed next to the batch store.
    pub fn in_dir(batches: impl Into<PathBuf>) -> Self {
        let batches = batches.into();
        ServicePaths {
            feedback_log: batches.join("feedback.jsonl"),
            edit_log: batches.join("edits.jsonl"),
            batches,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown article {0:?}")]
    NotFound(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// One saved edit: the article text after accepted links were written in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub article: String,
    pub base_text_hash: String,
    pub accepted: Vec<String>,
    pub client_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub article: String,
    #[serde(default)]
    pub accepted: Vec<String>,
    #[serde(default)]
    pub client_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub article: String,
    pub text: String,
    pub events: Vec<u64>,
}

/// Recommendations for one article as served, empty when it has no batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    pub article: String,
    /// The article changed after the batch was generated.
    pub stale: bool,
    pub model_version: Option<String>,
    pub generated_at: Option<DateTime<Utc>>,
    pub p_star: Option<f64>,
    pub recommendations: Vec<ServedRecommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub article: String,
    pub recommendations: usize,
}

pub fn read_edit_log(path: impl AsRef<Path>) -> io::Result<Vec<EditRecord>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?);
    }
    Ok(out)
}

/// The corpus with every saved edit applied.
pub fn edited_corpus(corpus: &Corpus, edit_log: impl AsRef<Path>) -> Result<Corpus, ServiceError> {
    let mut texts: BTreeMap<String, String> = BTreeMap::new();
    for r in read_edit_log(edit_log)? {
        texts.insert(r.article, r.text);
    }
    if texts.is_empty() {
        return Ok(corpus.clone());
    }
    let articles: Vec<Article> = corpus
        .articles()
        .iter()
        .map(|a| match texts.get(&a.title) {
            Some(t) if !a.is_redirect() => Article {
                raw_text: t.clone(),
                ..a.clone()
            },
            _ => a.clone(),
        })
        .collect();
    let mut edited = Corpus::from_articles(articles).map_err(|e| match e {
        CorpusError::Io(e) => ServiceError::Io(e),
        other => ServiceError::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            other.to_string(),
        )),
    })?;
    edited.set_sentence_config(corpus.sentence_config().clone());
    Ok(edited)
}

struct Writer {
    feedback: FeedbackLog,
    edits: File,
}

pub struct ServiceState {
    config: ServiceConfig,
    paths: ServicePaths,
    batches: BatchStore,
    articles: RwLock<BTreeMap<String, String>>,
    writer: Mutex<Writer>,
}

impl ServiceState {
    /// Loads article texts from the corpus, then replays the edit and
    /// feedback logs.
    pub fn open(
        corpus: &Corpus,
        paths: ServicePaths,
        config: ServiceConfig,
    ) -> Result<Self, ServiceError> {
        let mut articles: BTreeMap<String, String> = corpus
            .content_articles()
            .map(|a| (a.title.clone(), a.raw_text.clone()))
            .collect();
        for r in read_edit_log(&paths.edit_log)? {
            if let Some(text) = articles.get_mut(&r.article) {
                *text = r.text;
            }
        }
        let batches = BatchStore::open(&paths.batches)?;
        let feedback = FeedbackLog::open(&paths.feedback_log)?;
        if let Some(dir) = paths
            .edit_log
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
        {
            std::fs::create_dir_all(dir)?;
        }
        let edits = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&paths.edit_log)?;
        Ok(ServiceState {
            config,
            paths,
            batches,
            articles: RwLock::new(articles),
            writer: Mutex::new(Writer { feedback, edits }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn paths(&self) -> &ServicePaths {
        &self.paths
    }

    pub fn batch_set(&self) -> Result<Arc<BatchSet>, ServiceError> {
        Ok(self.batches.current()?)
    }

    pub fn article_text(&self, article: &str) -> Option<String> {
        self.articles
            .read()
            .expect("article lock")
            .get(article)
            .cloned()
    }

    pub fn recommendations(&self, article: &str) -> Result<BatchView, ServiceError> {
        let text = self
            .article_text(article)
            .ok_or_else(|| ServiceError::NotFound(article.to_string()))?;
        let set = self.batch_set()?;
        let view = match set.get(article) {
            Some(b) => BatchView {
                article: article.to_string(),
                stale: b.base_text_hash != text_digest(&text),
                model_version: Some(b.model_version.clone()),
                generated_at: Some(b.generated_at),
                p_star: Some(b.p_star),
                recommendations: b.recommendations.clone(),
            },
            None => BatchView {
                article: article.to_string(),
                stale: false,
                model_version: None,
                generated_at: None,
                p_star: None,
                recommendations: Vec::new(),
            },
        };
        Ok(view)
    }

    pub fn tasks(&self, min_links: usize) -> Result<Vec<Task>, ServiceError> {
        Ok(self
            .batch_set()?
            .tasks(min_links)
            .into_iter()
            .map(|(article, recommendations)| Task {
                article,
                recommendations,
            })
            .collect())
    }

    pub fn feedback_state(&self) -> FeedbackState {
        self.writer
            .lock()
            .expect("writer lock")
            .feedback
            .state()
            .clone()
    }

    pub fn post_feedback(
        &self,
        submission: FeedbackSubmission,
    ) -> Result<FeedbackEvent, ServiceError> {
        submission.validate(&self.config.rejection_reasons)?;
        let mut writer = self.writer.lock().expect("writer lock");
        let mut events = writer.feedback.append(vec![submission])?;
        Ok(events.remove(0))
    }

    /// Writes the accepted recommendations into the article as one edit and
    /// records an accepted event for each. Fails as a whole with a conflict
    /// when the article changed since its batch was generated.
    pub fn submit_edit(&self, request: EditRequest) -> Result<EditOutcome, ServiceError> {
        let mut writer = self.writer.lock().expect("writer lock");
        let text = self
            .article_text(&request.article)
            .ok_or_else(|| ServiceError::NotFound(request.article.clone()))?;
        let mut ids = request.accepted.clone();
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Ok(EditOutcome {
                article: request.article,
                text,
                events: Vec::new(),
            });
        }
        let set = self.batch_set()?;
        let batch = set
            .get(&request.article)
            .ok_or_else(|| ValidationError::new("accepted", "article has no recommendations"))?;
        let base = text_digest(&text);
        if batch.base_text_hash != base {
            return Err(ServiceError::Conflict(format!(
                "{:?} changed since its recommendations were generated",
                request.article
            )));
        }
        let mut accepted: Vec<Recommendation> = Vec::with_capacity(ids.len());
        for id in &ids {
            let rec = batch
                .get(id)
                .ok_or_else(|| ValidationError::new("accepted", format!("unknown id {id:?}")))?;
            accepted.push(rec.clone());
        }
        let new_text = apply_edit(&text, &accepted).map_err(|e| match e {
            EditError::Stale { .. } | EditError::Overlap { .. } => {
                ServiceError::Conflict(e.to_string())
            }
            other => ServiceError::Validation(ValidationError::new("accepted", other.to_string())),
        })?;

        let record = EditRecord {
            article: request.article.clone(),
            base_text_hash: base,
            accepted: ids,
            client_id: request.client_id.clone(),
            timestamp: Utc::now(),
            text: new_text.clone(),
        };
        let mut line = serde_json::to_vec(&record).map_err(io::Error::other)?;
        line.push(b'\n');
        writer.edits.write_all(&line)?;
        writer.edits.sync_data()?;

        let submissions = accepted
            .iter()
            .map(|r| FeedbackSubmission {
                article: request.article.clone(),
                span: r.span,
                surface: r.surface.clone(),
                target: r.target.clone(),
                probability: r.probability,
                decision: Decision::Accepted,
                rejection_reason: None,
                client_id: request.client_id.clone(),
                timestamp: Some(record.timestamp),
            })
            .collect();
        let events = writer.feedback.append(submissions)?;
        self.articles
            .write()
            .expect("article lock")
            .insert(request.article.clone(), new_text.clone());
        Ok(EditOutcome {
            article: request.article,
            text: new_text,
            events: events.iter().map(|e| e.id).collect(),
        })
    }

    /// Regenerates every batch from the current article texts, leaving out
    /// rejected suggestions, and swaps the store.
    pub fn regenerate(
        &self,
        corpus: &Corpus,
        scorer: &Scorer<'_>,
        config: &LinkerConfig,
    ) -> Result<usize, ServiceError> {
        let _writer = self.writer.lock().expect("writer lock");
        regenerate_into(&self.batches, corpus, scorer, config, &self.paths)
    }
}

/// The batch job: replays edits and feedback from `paths`, regenerates and
/// publishes a new generation. Returns the number of batches.
pub fn regenerate(
    corpus: &Corpus,
    scorer: &Scorer<'_>,
    config: &LinkerConfig,
    paths: &ServicePaths,
) -> Result<usize, ServiceError> {
    let store = BatchStore::open(&paths.batches)?;
    regenerate_into(&store, corpus, scorer, config, paths)
}

fn regenerate_into(
    store: &BatchStore,
    corpus: &Corpus,
    scorer: &Scorer<'_>,
    config: &LinkerConfig,
    paths: &ServicePaths,
) -> Result<usize, ServiceError> {
    let edited = edited_corpus(corpus, &paths.edit_log)?;
    let mut config = config.clone();
    config
        .rejected
        .extend(replay(&paths.feedback_log)?.rejected);
    let batches = generate_batches(&edited, scorer, &config)
        .map_err(|e| ValidationError::new("config", e.to_string()))?;
    let n = batches.len();
    store.publish(batches)?;
    Ok(n)
}
