use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{eval_config, gold_triples, link_counts, score_sentences, GoldSentence, Metrics};
use crate::features::{Feature, FeatureExtractor};
use crate::linker::Scorer;
use crate::mentions::DEFAULT_MAX_NGRAM;
use crate::model::{self, without_features, BoostParams, LinkModel, ModelError, TrainingInstance};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub feature: Feature,
    pub precision: f64,
    pub recall: f64,
    /// Relative change against the full model, in percent.
    pub delta_precision_pct: f64,
    pub delta_recall_pct: f64,
    /// Normalized importance of the feature in the full model.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub p_star: f64,
    pub full: Metrics<f64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// The feature whose removal lowers recall the most.
    pub fn largest_recall_drop(&self) -> Option<Feature> {
        self.rows
            .iter()
            .min_by(|a, b| a.delta_recall_pct.total_cmp(&b.delta_recall_pct))
            .map(|r| r.feature)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "full model at p*={:.2}: precision {:.4}, recall {:.4}",
            self.p_star, self.full.precision, self.full.recall
        );
        let _ = writeln!(
            out,
            "{:>8}  {:>10}  {:>10}  {:>10}",
            "feature", "score", "dPre %", "dRec %"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>8}  {:>10.2}  {:>10.2}  {:>10.2}",
                r.feature.short_name(),
                r.score,
                r.delta_precision_pct,
                r.delta_recall_pct
            );
        }
        out
    }
}

fn relative(x: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (x - base) / base * 100.0
    }
}

fn test_metrics<T: Scalar>(
    extractor: FeatureExtractor<'_, T>,
    model: &LinkModel<T>,
    test: &[GoldSentence],
    p_star: f64,
) -> Metrics<f64> {
    let scorer = Scorer::new(extractor, model);
    let scored = score_sentences(&scorer, test, DEFAULT_MAX_NGRAM);
    link_counts(&scored, &gold_triples(test), &eval_config(p_star)).metrics()
}

/// Retrains once per removed feature and compares test precision and recall
/// at a fixed threshold against the full model.
pub fn ablation<T: Scalar>(
    instances: &[TrainingInstance<T>],
    test: &[GoldSentence],
    extractor: FeatureExtractor<'_, T>,
    params: &BoostParams,
    p_star: f64,
) -> Result<AblationReport, ModelError> {
    let full_model = model::train(instances, params, None)?;
    let full = test_metrics(extractor, &full_model, test, p_star);
    let importance = full_model.feature_importance();
    let mut rows = Vec::with_capacity(Feature::ALL.len());
    for (feature, score) in importance {
        let reduced = model::train(instances, &without_features(params, &[feature]), None)?;
        let m = test_metrics(extractor, &reduced, test, p_star);
        rows.push(AblationRow {
            feature,
            precision: m.precision,
            recall: m.recall,
            delta_precision_pct: relative(m.precision, full.precision),
            delta_recall_pct: relative(m.recall, full.recall),
            score: score.to_f64_lossy(),
        });
    }
    Ok(AblationReport { p_star, full, rows })
}
