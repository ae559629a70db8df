use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::corpus::{Article, Corpus};
use crate::linker::{LinkerConfig, ScoredText, Scorer};
use crate::scalar::Scalar;

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const DEFAULT_MIN_RECS: usize = 5;

/// `total · hits / sampled` rounded to the nearest integer, halves up.
pub fn extrapolate(total: u64, hits: u64, sampled: u64) -> u64 {
    if sampled == 0 {
        return 0;
    }
    let (t, h, s) = (total as u128, hits as u128, sampled as u128);
    ((2 * t * h + s) / (2 * s)) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct N5Estimate {
    pub total: u64,
    pub sampled: u64,
    pub hits: u64,
    pub estimate: u64,
    /// Sampled articles with enough recommendations, by title.
    pub qualifying: Vec<String>,
}

/// Content articles drawn without replacement; all of them when the sample
/// is at least as large as the corpus. Sorted by title.
pub fn sample_articles(corpus: &Corpus, sample_size: usize, seed: u64) -> Vec<&Article> {
    let mut articles: Vec<&Article> = corpus.content_articles().collect();
    articles.sort_by(|a, b| a.title.cmp(&b.title));
    if sample_size < articles.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        articles.shuffle(&mut rng);
        articles.truncate(sample_size);
        articles.sort_by(|a, b| a.title.cmp(&b.title));
    }
    articles
}

pub fn score_sample<T: Scalar>(
    corpus: &Corpus,
    scorer: &Scorer<'_, T>,
    sample_size: usize,
    seed: u64,
    max_ngram: usize,
) -> Vec<ScoredText<T>> {
    sample_articles(corpus, sample_size, seed)
        .into_iter()
        .map(|a| scorer.score_article(&corpus.parse(a), max_ngram))
        .collect()
}

pub fn count_qualifying<T: Scalar>(
    total: u64,
    scored: &[ScoredText<T>],
    config: &LinkerConfig,
    min_recs: usize,
) -> N5Estimate {
    let qualifying: Vec<String> = scored
        .iter()
        .filter(|s| s.select(config).len() >= min_recs)
        .map(|s| s.source.clone())
        .collect();
    let hits = qualifying.len() as u64;
    let sampled = scored.len() as u64;
    N5Estimate {
        total,
        sampled,
        hits,
        estimate: extrapolate(total, hits, sampled),
        qualifying,
    }
}

/// Estimated number of articles receiving at least `min_recs`
/// recommendations, extrapolated from a seeded sample.
pub fn estimate_n5<T: Scalar>(
    corpus: &Corpus,
    scorer: &Scorer<'_, T>,
    config: &LinkerConfig,
    sample_size: usize,
    min_recs: usize,
    seed: u64,
) -> N5Estimate {
    let scored = score_sample(corpus, scorer, sample_size, seed, config.max_ngram);
    count_qualifying(corpus.content_count() as u64, &scored, config, min_recs)
}

/// Fills the n5 column of a sweep, reusing one scoring pass for all rows.
pub fn attach_n5<T: Scalar>(
    report: &mut EvalReport,
    corpus: &Corpus,
    scorer: &Scorer<'_, T>,
    base: &LinkerConfig,
    sample_size: usize,
    seed: u64,
) {
    let scored = score_sample(corpus, scorer, sample_size, seed, base.max_ngram);
    let total = corpus.content_count() as u64;
    for row in &mut report.rows {
        let config = LinkerConfig {
            p_star: row.p_star,
            ..base.clone()
        };
        row.n5 = Some(count_qualifying(total, &scored, &config, DEFAULT_MIN_RECS).estimate);
    }
}
