//! Recommendation batches and their on-disk store.
//!
//! The store keeps each generation in its own directory and names the live one
//! in a `CURRENT` file that is replaced with a rename, so a reader sees either
//! the old generation or the new one.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anchorlink::corpus::Corpus;
use anchorlink::linker::{ConfigError, LinkerConfig};
use anchorlink::{text_digest, Recommendation, Scorer};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

const CURRENT: &str = "CURRENT";
const GENERATIONS: &str = "generations";
const BATCH_FILE: &str = "batches.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedRecommendation {
    pub id: String,
    #[serde(flatten)]
    pub recommendation: Recommendation,
}

impl From<Recommendation> for ServedRecommendation {
    fn from(recommendation: Recommendation) -> Self {
        ServedRecommendation {
            id: recommendation.id(),
            recommendation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationBatch {
    pub article: String,
    pub model_version: String,
    pub generated_at: DateTime<Utc>,
    pub p_star: f64,
    /// Digest of the raw text the recommendations were computed on.
    pub base_text_hash: String,
    pub recommendations: Vec<ServedRecommendation>,
}

impl RecommendationBatch {
    pub fn get(&self, id: &str) -> Option<&Recommendation> {
        self.recommendations
            .iter()
            .find(|r| r.id == id)
            .map(|r| &r.recommendation)
    }
}

/// One immutable generation of batches keyed by article title.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchSet {
    pub generation: String,
    pub batches: BTreeMap<String, RecommendationBatch>,
}

impl BatchSet {
    pub fn get(&self, article: &str) -> Option<&RecommendationBatch> {
        self.batches.get(article)
    }

    /// Articles with at least `min_links` recommendations, most first, then
    /// by title.
    pub fn tasks(&self, min_links: usize) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self
            .batches
            .values()
            .map(|b| (b.article.clone(), b.recommendations.len()))
            .filter(|&(_, n)| n >= min_links)
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// One batch per content article with at least one recommendation, in title
/// order.
pub fn generate_batches(
    corpus: &Corpus,
    scorer: &Scorer<'_>,
    config: &LinkerConfig,
) -> Result<Vec<RecommendationBatch>, ConfigError> {
    config.validate()?;
    let model_version = scorer.model.fingerprint();
    let generated_at = Utc::now();
    let mut articles: Vec<_> = corpus.content_articles().collect();
    articles.sort_by(|a, b| a.title.cmp(&b.title));
    let mut out = Vec::new();
    for article in articles {
        let recs = scorer.recommend(&corpus.parse(article), config)?;
        if recs.is_empty() {
            continue;
        }
        out.push(RecommendationBatch {
            article: article.title.clone(),
            model_version: model_version.clone(),
            generated_at,
            p_star: config.p_star,
            base_text_hash: text_digest(&article.raw_text),
            recommendations: recs.into_iter().map(Into::into).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug)]
pub struct BatchStore {
    root: PathBuf,
    live: RwLock<Arc<BatchSet>>,
}

impl BatchStore {
    /// Opens or creates a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(GENERATIONS))?;
        let set = match read_pointer(&root)? {
            Some(generation) => load_generation(&root, &generation)?,
            None => BatchSet::default(),
        };
        Ok(BatchStore {
            root,
            live: RwLock::new(Arc::new(set)),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// The live generation, reloaded if another process has published since.
    pub fn current(&self) -> io::Result<Arc<BatchSet>> {
        let cached = self.live.read().expect("batch lock").clone();
        let pointer = read_pointer(&self.root)?.unwrap_or_default();
        if pointer == cached.generation {
            return Ok(cached);
        }
        let fresh = Arc::new(load_generation(&self.root, &pointer)?);
        *self.live.write().expect("batch lock") = fresh.clone();
        Ok(fresh)
    }

    /// Writes a new generation and makes it live. On error the previous
    /// generation stays live.
    pub fn publish(&self, batches: Vec<RecommendationBatch>) -> io::Result<Arc<BatchSet>> {
        let previous = read_pointer(&self.root)?;
        let generation = next_generation(&self.root)?;
        let dir = self.root.join(GENERATIONS).join(&generation);
        let staging = self
            .root
            .join(GENERATIONS)
            .join(format!("{generation}.tmp"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        {
            let file = File::create(staging.join(BATCH_FILE))?;
            let mut w = BufWriter::new(&file);
            for b in &batches {
                serde_json::to_writer(&mut w, b)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            drop(w);
            file.sync_all()?;
        }
        fs::rename(&staging, &dir)?;

        let tmp = self.root.join(format!("{CURRENT}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(generation.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.root.join(CURRENT))?;

        let set = Arc::new(BatchSet {
            generation: generation.clone(),
            batches: batches
                .into_iter()
                .map(|b| (b.article.clone(), b))
                .collect(),
        });
        *self.live.write().expect("batch lock") = set.clone();
        prune(&self.root, &generation, previous.as_deref());
        Ok(set)
    }
}

fn read_pointer(root: &Path) -> io::Result<Option<String>> {
    match fs::read_to_string(root.join(CURRENT)) {
        Ok(s) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

fn load_generation(root: &Path, generation: &str) -> io::Result<BatchSet> {
    if generation.is_empty() {
        return Ok(BatchSet::default());
    }
    let path = root.join(GENERATIONS).join(generation).join(BATCH_FILE);
    let mut batches = BTreeMap::new();
    for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let batch: RecommendationBatch = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?;
        batches.insert(batch.article.clone(), batch);
    }
    Ok(BatchSet {
        generation: generation.to_string(),
        batches,
    })
}

fn generation_number(name: &str) -> Option<u64> {
    name.strip_prefix('g')?.parse().ok()
}

fn next_generation(root: &Path) -> io::Result<String> {
    let mut max = 0;
    for entry in fs::read_dir(root.join(GENERATIONS))? {
        let name = entry?.file_name();
        if let Some(n) = name.to_str().and_then(generation_number) {
            max = max.max(n);
        }
    }
    Ok(format!("g{:06}", max + 1))
}

/// Keeps the live generation and the one before it; older ones go.
fn prune(root: &Path, live: &str, previous: Option<&str>) {
    let Ok(entries) = fs::read_dir(root.join(GENERATIONS)) else {
        return;
    };
    for entry in entries.flatten() {
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name == live || Some(name) == previous || generation_number(name).is_none() {
            continue;
        }
        if let Err(e) = fs::remove_dir_all(entry.path()) {
            tracing::warn!("could not prune generation {name}: {e}");
        }
    }
}
