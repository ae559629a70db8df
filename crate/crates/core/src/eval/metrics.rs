use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::anchors::normalize_mention;

/// A (source, target, mention) label with the mention normalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub source: String,
    pub target: String,
    pub mention: String,
}

impl Triple {
    pub fn new(source: &str, target: &str, mention: &str) -> Self {
        Triple {
            source: source.to_string(),
            target: target.to_string(),
            mention: normalize_mention(mention),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: u64,
    pub gold: u64,
    pub true_positives: u64,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        self.predicted += rhs.predicted;
        self.gold += rhs.gold;
        self.true_positives += rhs.true_positives;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl Counts {
    /// Multiset matching: each gold triple absorbs at most one prediction.
    pub fn from_triples(predicted: &[Triple], gold: &[Triple]) -> Counts {
        let mut remaining: HashMap<&Triple, u64> = HashMap::new();
        for g in gold {
            *remaining.entry(g).or_default() += 1;
        }
        let mut tp = 0;
        for p in predicted {
            if let Some(n) = remaining.get_mut(p) {
                if *n > 0 {
                    *n -= 1;
                    tp += 1;
                }
            }
        }
        Counts {
            predicted: predicted.len() as u64,
            gold: gold.len() as u64,
            true_positives: tp,
        }
    }

    /// Precision, recall and F1 in any number type. Empty denominators give 0.
    pub fn metrics_with<T: Num + Clone>(&self, lift: impl Fn(u64) -> T) -> Metrics<T> {
        let div = |n: u64, d: u64| if d == 0 { T::zero() } else { lift(n) / lift(d) };
        Metrics {
            precision: div(self.true_positives, self.predicted),
            recall: div(self.true_positives, self.gold),
            f1: div(2 * self.true_positives, self.predicted + self.gold),
        }
    }

    pub fn metrics(&self) -> Metrics<f64> {
        self.metrics_with(|n| n as f64)
    }

    pub fn exact(&self) -> Metrics<Ratio<u64>> {
        self.metrics_with(Ratio::from_integer)
    }
}

/// Micro-averaged precision, recall and F1 over pooled triples.
pub fn micro_metrics(predicted: &[Triple], gold: &[Triple]) -> Metrics<f64> {
    Counts::from_triples(predicted, gold).metrics()
}

pub fn micro_metrics_exact(predicted: &[Triple], gold: &[Triple]) -> Metrics<Ratio<u64>> {
    Counts::from_triples(predicted, gold).exact()
}
