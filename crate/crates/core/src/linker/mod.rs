//! Link recommendation: mention detection, candidate scoring, thresholding
//! and placement constraints, plus writing accepted links back as markup.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::normalize_mention;
use crate::corpus::{
    is_markup_safe, link_markup, parse_markup, LinkFragment, MarkupError, ParsedArticle,
    SentenceSpan,
};
use crate::features::FeatureExtractor;
use crate::mentions::{detect_mentions, MentionCandidate, DEFAULT_MAX_NGRAM};
use crate::model::LinkModel;
use crate::scalar::Scalar;
use crate::span::{IndexedText, Span};

/// A (source, mention, target) judgement that should not be suggested again.
/// `mention` is normalized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RejectedTriple {
    pub source: String,
    pub mention: String,
    pub target: String,
}

impl RejectedTriple {
    pub fn new(source: &str, mention: &str, target: &str) -> Self {
        RejectedTriple {
            source: source.to_string(),
            mention: normalize_mention(mention),
            target: target.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkerConfig {
    pub p_star: f64,
    /// Skip a mention whose best target is already linked in the article.
    pub once_per_target: bool,
    pub max_links_per_sentence: Option<usize>,
    pub max_ngram: usize,
    #[serde(default)]
    pub rejected: BTreeSet<RejectedTriple>,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            p_star: 0.5,
            once_per_target: true,
            max_links_per_sentence: None,
            max_ngram: DEFAULT_MAX_NGRAM,
            rejected: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("p_star must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("max_ngram must be positive")]
    Ngram,
}

impl LinkerConfig {
    pub fn with_p_star(p_star: f64) -> Self {
        LinkerConfig {
            p_star,
            ..LinkerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.p_star) {
            return Err(ConfigError::Threshold(self.p_star));
        }
        if self.max_ngram == 0 {
            return Err(ConfigError::Ngram);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore<T> {
    pub target: String,
    pub probability: T,
    pub freq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMention<T> {
    pub mention: MentionCandidate,
    /// Best first: probability, then frequency, then title.
    pub candidates: Vec<CandidateScore<T>>,
}

/// Scores for every detected mention of one text, kept so that several
/// configurations can be applied without rescoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredText<T> {
    pub source: String,
    pub mentions: Vec<ScoredMention<T>>,
    /// Targets already linked in the text.
    pub existing_targets: HashSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternate<T> {
    pub target: String,
    pub probability: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation<T> {
    pub source: String,
    pub target: String,
    /// Normalized mention.
    pub mention: String,
    pub surface: String,
    pub span: Span,
    pub sentence_index: usize,
    pub probability: T,
    /// 1-based position of the target among the mention's candidates by
    /// link frequency.
    pub rank: usize,
    pub alternates: Vec<Alternate<T>>,
}

impl<T> Recommendation<T> {
    pub fn triple(&self) -> (&str, &str, &str) {
        (&self.source, &self.target, &self.mention)
    }

    /// Identifier unique within one article's recommendations.
    pub fn id(&self) -> String {
        format!("{}-{}", self.span.start, self.span.end)
    }
}

fn best_first<T: Scalar>(a: &CandidateScore<T>, b: &CandidateScore<T>) -> Ordering {
    b.probability
        .partial_cmp(&a.probability)
        .unwrap_or(Ordering::Equal)
        .then(b.freq.cmp(&a.freq))
        .then_with(|| a.target.cmp(&b.target))
}

pub struct Scorer<'a, T> {
    pub extractor: FeatureExtractor<'a, T>,
    pub model: &'a LinkModel<T>,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub fn new(extractor: FeatureExtractor<'a, T>, model: &'a LinkModel<T>) -> Self {
        Scorer { extractor, model }
    }

    /// Model probability for every candidate of a normalized mention. The
    /// source article itself is never a candidate.
    pub fn score_candidates(&self, source: &str, mention: &str) -> Vec<CandidateScore<T>> {
        let Some(stats) = self.extractor.dict.get_normalized(mention) else {
            return Vec::new();
        };
        let mut out: Vec<CandidateScore<T>> = stats
            .candidates
            .iter()
            .filter(|(t, _)| t.as_str() != source)
            .map(|(target, &freq)| {
                let features = self
                    .extractor
                    .extract(source, target, mention)
                    .expect("candidate comes from the dictionary");
                CandidateScore {
                    target: target.clone(),
                    probability: self.model.predict(&features),
                    freq,
                }
            })
            .collect();
        out.sort_by(best_first);
        out
    }

    pub fn score_mentions(
        &self,
        source: &str,
        text: &IndexedText,
        sentences: &[SentenceSpan],
        skip_spans: &[Span],
        max_ngram: usize,
    ) -> Vec<ScoredMention<T>> {
        let mut out = Vec::new();
        for (i, sentence) in sentences.iter().enumerate() {
            for m in detect_mentions(
                text,
                sentence,
                i,
                self.extractor.dict,
                max_ngram,
                skip_spans,
            ) {
                let candidates = self.score_candidates(source, &m.mention);
                if !candidates.is_empty() {
                    out.push(ScoredMention {
                        mention: m,
                        candidates,
                    });
                }
            }
        }
        out
    }

    pub fn score_article(&self, article: &ParsedArticle, max_ngram: usize) -> ScoredText<T> {
        ScoredText {
            source: article.title.clone(),
            mentions: self.score_mentions(
                &article.title,
                &article.text,
                &article.sentences,
                &article.link_spans(),
                max_ngram,
            ),
            existing_targets: article.links.iter().map(|l| l.target.clone()).collect(),
        }
    }

    pub fn recommend(
        &self,
        article: &ParsedArticle,
        config: &LinkerConfig,
    ) -> Result<Vec<Recommendation<T>>, ConfigError> {
        config.validate()?;
        Ok(self.score_article(article, config.max_ngram).select(config))
    }
}

impl<T: Scalar> ScoredText<T> {
    /// Applies the threshold and placement constraints. Rejected triples are
    /// removed before the best candidate is taken.
    pub fn select(&self, config: &LinkerConfig) -> Vec<Recommendation<T>> {
        let p_star = T::from_f64_lossy(config.p_star);
        let mut used: HashSet<&str> = if config.once_per_target {
            self.existing_targets.iter().map(String::as_str).collect()
        } else {
            HashSet::new()
        };
        let mut per_sentence: HashMap<usize, usize> = HashMap::new();
        let mut out = Vec::new();
        for scored in &self.mentions {
            let m = &scored.mention;
            let allowed: Vec<&CandidateScore<T>> = scored
                .candidates
                .iter()
                .filter(|c| {
                    config.rejected.is_empty()
                        || !config.rejected.contains(&RejectedTriple {
                            source: self.source.clone(),
                            mention: m.mention.clone(),
                            target: c.target.clone(),
                        })
                })
                .collect();
            let Some(best) = allowed.first() else {
                continue;
            };
            if best.probability < p_star {
                continue;
            }
            if config.once_per_target && used.contains(best.target.as_str()) {
                continue;
            }
            let count = per_sentence.entry(m.sentence_index).or_default();
            if config
                .max_links_per_sentence
                .is_some_and(|cap| *count >= cap)
            {
                continue;
            }
            *count += 1;
            if config.once_per_target {
                used.insert(&best.target);
            }
            let rank = 1 + scored
                .candidates
                .iter()
                .filter(|c| c.freq > best.freq || (c.freq == best.freq && c.target < best.target))
                .count();
            out.push(Recommendation {
                source: self.source.clone(),
                target: best.target.clone(),
                mention: m.mention.clone(),
                surface: m.surface.clone(),
                span: m.span,
                sentence_index: m.sentence_index,
                probability: best.probability,
                rank,
                alternates: allowed[1..]
                    .iter()
                    .map(|c| Alternate {
                        target: c.target.clone(),
                        probability: c.probability,
                    })
                    .collect(),
            });
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EditError {
    #[error("article markup is invalid: {0}")]
    Markup(#[from] MarkupError),
    #[error("span {}..{} no longer reads {surface:?}", span.start, span.end)]
    Stale { span: Span, surface: String },
    #[error("span {}..{} overlaps another link", span.start, span.end)]
    Overlap { span: Span },
    #[error("target {0:?} cannot be written as a link")]
    Unsafe(String),
}

/// Wraps each accepted recommendation's span in link markup. Spans refer to
/// the plain text of `raw_text`. Either every link is applied or an error is
/// returned.
pub fn apply_edit<T>(raw_text: &str, accepted: &[Recommendation<T>]) -> Result<String, EditError> {
    if accepted.is_empty() {
        return Ok(raw_text.to_string());
    }
    let parsed = parse_markup(raw_text)?;
    let plain = IndexedText::new(parsed.plain_text.clone());
    let mut order: Vec<&Recommendation<T>> = accepted.iter().collect();
    order.sort_by_key(|r| r.span);

    for (i, rec) in order.iter().enumerate() {
        if plain.get(rec.span) != Some(rec.surface.as_str()) || rec.span.is_empty() {
            return Err(EditError::Stale {
                span: rec.span,
                surface: rec.surface.clone(),
            });
        }
        let clashes_existing = parsed.links.iter().any(|l| l.span.overlaps(&rec.span));
        let clashes_next = order.get(i + 1).is_some_and(|n| n.span.overlaps(&rec.span));
        if clashes_existing || clashes_next {
            return Err(EditError::Overlap { span: rec.span });
        }
        if !is_markup_safe(&rec.target, false) || !is_markup_safe(&rec.surface, true) {
            return Err(EditError::Unsafe(rec.target.clone()));
        }
    }

    let raw = IndexedText::new(raw_text);
    let mut out = String::with_capacity(raw_text.len() + accepted.len() * 16);
    let mut pos = 0usize;
    for rec in &order {
        let start = parsed.raw_offset(rec.span.start);
        let end = start + rec.span.len();
        out.push_str(raw.slice(Span::new(pos, start)));
        out.push_str(&link_markup(&rec.target, &rec.surface));
        pos = end;
    }
    out.push_str(raw.slice(Span::new(pos, raw.char_len())));

    // bracket runs next to an insertion can change how the text parses
    let check = parse_markup(&out)?;
    let expected: Vec<LinkFragment> = {
        let mut v: Vec<LinkFragment> = parsed.links.clone();
        v.extend(order.iter().map(|r| LinkFragment {
            target: r.target.clone(),
            mention: r.surface.clone(),
            span: r.span,
        }));
        v.sort_by_key(|l| l.span);
        v
    };
    if check.plain_text != parsed.plain_text || check.links != expected {
        let span = order[0].span;
        return Err(EditError::Overlap { span });
    }
    Ok(out)
}
