//! Gold-standard construction and the evaluation protocol: threshold sweeps,
//! article-coverage estimates, feature ablation and the two sub-tasks.

pub mod ablation;
pub mod gold;
pub mod metrics;
pub mod n5;
pub mod report;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::normalize_mention;
use crate::linker::{LinkerConfig, ScoredText, Scorer};
use crate::mentions::{all_mention_windows, DEFAULT_MAX_NGRAM};
use crate::scalar::Scalar;

pub use ablation::{ablation, AblationReport, AblationRow};
pub use gold::{
    build_gold, load_gold, save_gold, strip_links, GoldConfig, GoldSentence, GoldSet, Split,
};
pub use metrics::{micro_metrics, micro_metrics_exact, Counts, Metrics, Triple};
pub use n5::{estimate_n5, extrapolate, N5Estimate};
pub use report::{EvalReport, SweepRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no content article has a linked sentence")]
    NoLinkedSentences,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// p* = 0.0, 0.1, …, 0.9.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

pub fn gold_triples(sentences: &[GoldSentence]) -> Vec<Triple> {
    sentences
        .iter()
        .flat_map(|s| {
            s.links
                .iter()
                .map(move |l| Triple::new(&s.source, &l.target, &l.mention))
        })
        .collect()
}

/// Scores every test sentence once so thresholds can be swept cheaply.
pub fn score_sentences<T: Scalar>(
    scorer: &Scorer<'_, T>,
    sentences: &[GoldSentence],
    max_ngram: usize,
) -> Vec<ScoredText<T>> {
    sentences
        .iter()
        .map(|s| {
            let (text, span) = s.segment();
            ScoredText {
                source: s.source.clone(),
                mentions: scorer.score_mentions(&s.source, &text, &[span], &[], max_ngram),
                existing_targets: Default::default(),
            }
        })
        .collect()
}

/// Pooled counts for the linker run on stripped sentences. Each prediction
/// is a (source, target, normalized mention) triple.
pub fn link_counts<T: Scalar>(
    scored: &[ScoredText<T>],
    gold: &[Triple],
    config: &LinkerConfig,
) -> Counts {
    let predicted: Vec<Triple> = scored
        .iter()
        .flat_map(|s| s.select(config))
        .map(|r| Triple {
            source: r.source,
            target: r.target,
            mention: r.mention,
        })
        .collect();
    Counts::from_triples(&predicted, gold)
}

fn eval_config(p_star: f64) -> LinkerConfig {
    LinkerConfig {
        p_star,
        once_per_target: false,
        ..LinkerConfig::default()
    }
}

/// One row per threshold, ascending. Evaluation runs without the
/// once-per-target constraint.
pub fn threshold_sweep<T: Scalar>(
    scorer: &Scorer<'_, T>,
    test: &[GoldSentence],
    thresholds: &[f64],
) -> EvalReport {
    let scored = score_sentences(scorer, test, DEFAULT_MAX_NGRAM);
    sweep_scored(&scored, test, thresholds)
}

pub fn sweep_scored<T: Scalar>(
    scored: &[ScoredText<T>],
    test: &[GoldSentence],
    thresholds: &[f64],
) -> EvalReport {
    let gold = gold_triples(test);
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    let rows = thresholds
        .iter()
        .map(|&p| {
            let counts = link_counts(scored, &gold, &eval_config(p));
            SweepRow::new(p, counts)
        })
        .collect();
    EvalReport {
        rows,
        sentences: test.len(),
        links: gold.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationReport {
    pub evaluated: usize,
    pub correct: usize,
    /// Gold mentions without any dictionary candidate.
    pub skipped: usize,
    pub precision: f64,
}

/// For each gold link with at least one candidate, whether the most probable
/// candidate is the gold target.
pub fn eval_disambiguation<T: Scalar>(
    scorer: &Scorer<'_, T>,
    test: &[GoldSentence],
) -> DisambiguationReport {
    let (mut evaluated, mut correct, mut skipped) = (0, 0, 0);
    for s in test {
        for link in &s.links {
            let candidates = scorer.score_candidates(&s.source, &normalize_mention(&link.mention));
            match candidates.first() {
                None => skipped += 1,
                Some(best) => {
                    evaluated += 1;
                    if best.target == link.target {
                        correct += 1;
                    }
                }
            }
        }
    }
    DisambiguationReport {
        evaluated,
        correct,
        skipped,
        precision: if evaluated == 0 {
            0.0
        } else {
            correct as f64 / evaluated as f64
        },
    }
}

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionDetectionRow {
    pub p_star: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionDetectionReport {
    pub rows: Vec<MentionDetectionRow>,
    /// Top-candidate probabilities of windows matching a gold anchor.
    pub linked_histogram: [u64; HISTOGRAM_BINS],
    /// Same for windows that match no gold anchor.
    pub unlinked_histogram: [u64; HISTOGRAM_BINS],
    pub linked_probabilities: Vec<f64>,
    pub unlinked_probabilities: Vec<f64>,
    pub gold_anchors: usize,
    /// Gold anchors whose exact span is some dictionary window.
    pub matched_anchors: usize,
}

fn bin(p: f64) -> usize {
    ((p * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Every dictionary window of the stripped test sentences is judged on its
/// own, overlaps included. A window counts as a mention at p* when its best
/// candidate reaches p*; it is correct when its span equals a gold anchor.
pub fn eval_mention_detection<T: Scalar>(
    scorer: &Scorer<'_, T>,
    test: &[GoldSentence],
    thresholds: &[f64],
) -> MentionDetectionReport {
    let mut linked = Vec::new();
    let mut unlinked = Vec::new();
    let mut gold_anchors = 0;
    for s in test {
        let (text, span) = s.segment();
        gold_anchors += s.links.len();
        let windows = all_mention_windows(
            &text,
            &span,
            0,
            scorer.extractor.dict,
            DEFAULT_MAX_NGRAM,
            &[],
        );
        for w in windows {
            let Some(best) = scorer
                .score_candidates(&s.source, &w.mention)
                .into_iter()
                .next()
            else {
                continue;
            };
            let p = best.probability.to_f64_lossy();
            if s.links.iter().any(|l| l.span == w.span) {
                linked.push(p);
            } else {
                unlinked.push(p);
            }
        }
    }
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    let rows = thresholds
        .iter()
        .map(|&t| {
            let tp = linked.iter().filter(|&&p| p >= t).count();
            let fp = unlinked.iter().filter(|&&p| p >= t).count();
            MentionDetectionRow {
                p_star: t,
                precision: if tp + fp == 0 {
                    0.0
                } else {
                    tp as f64 / (tp + fp) as f64
                },
                recall: if gold_anchors == 0 {
                    0.0
                } else {
                    tp as f64 / gold_anchors as f64
                },
            }
        })
        .collect();
    let histogram = |ps: &[f64]| {
        let mut h = [0u64; HISTOGRAM_BINS];
        for &p in ps {
            h[bin(p)] += 1;
        }
        h
    };
    MentionDetectionReport {
        rows,
        linked_histogram: histogram(&linked),
        unlinked_histogram: histogram(&unlinked),
        matched_anchors: linked.len(),
        linked_probabilities: linked,
        unlinked_probabilities: unlinked,
        gold_anchors,
    }
}
