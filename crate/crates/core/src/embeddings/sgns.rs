//! Skip-gram with negative sampling over arbitrary token sequences.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsParams {
    pub dim: usize,
    /// Maximum context distance; each position draws its own radius in
    /// `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsParams {
    fn default() -> Self {
        SgnsParams {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 1,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SgnsOutput<T> {
    pub vectors: HashMap<String, Vec<T>>,
    /// (center, context) pairs seen in one epoch.
    pub pairs_per_epoch: usize,
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn build<S: AsRef<str>>(sequences: &[Vec<S>], min_count: u64) -> Vocab {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocab {
            counts: kept.iter().map(|&(_, c)| c).collect(),
            words,
            index,
        }
    }
}

/// Trains input vectors for every token occurring at least `min_count` times.
/// Deterministic for a given seed: training is single-threaded and all
/// randomness comes from one seeded generator.
pub fn train<T: Scalar, S: AsRef<str>>(sequences: &[Vec<S>], params: &SgnsParams) -> SgnsOutput<T> {
    let vocab = Vocab::build(sequences, params.min_count);
    let dim = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let encoded: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| vocab.index.get(t.as_ref()).copied())
                .collect()
        })
        .collect();

    let mut input: Vec<T> = (0..vocab.words.len() * dim)
        .map(|_| T::from_f64_lossy((rng.gen::<f64>() - 0.5) / dim as f64))
        .collect();
    let mut output: Vec<T> = vec![T::zero(); vocab.words.len() * dim];

    let pairs_per_epoch: usize = encoded
        .iter()
        .map(|s| {
            let n = s.len();
            (0..n)
                .map(|i| n.min(i + params.window + 1) - i.saturating_sub(params.window) - 1)
                .sum::<usize>()
        })
        .sum();

    if vocab.words.len() < 2 || pairs_per_epoch == 0 {
        return SgnsOutput {
            vectors: HashMap::new(),
            pairs_per_epoch,
        };
    }

    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .expect("non-empty vocabulary with positive counts");
    let total_positions: usize = encoded.iter().map(Vec::len).sum::<usize>() * params.epochs;
    let lr0 = params.learning_rate;
    let mut seen = 0usize;
    let mut grad = vec![T::zero(); dim];

    for _ in 0..params.epochs {
        for seq in &encoded {
            for (pos, &center) in seq.iter().enumerate() {
                let progress = seen as f64 / total_positions.max(1) as f64;
                let lr = T::from_f64_lossy((lr0 * (1.0 - progress)).max(lr0 * 1e-4));
                seen += 1;
                let radius = rng.gen_range(1..=params.window.max(1));
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(seq.len() - 1);
                for (ctx_pos, &context) in seq.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = T::zero());
                    let c_off = center * dim;
                    for k in 0..=params.negatives {
                        let (target, label) = if k == 0 {
                            (context, T::one())
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, T::zero())
                        };
                        let t_off = target * dim;
                        let dot: T = (0..dim).map(|d| input[c_off + d] * output[t_off + d]).sum();
                        let g = (label - dot.sigmoid()) * lr;
                        for d in 0..dim {
                            grad[d] += g * output[t_off + d];
                            output[t_off + d] += g * input[c_off + d];
                        }
                    }
                    for d in 0..dim {
                        input[c_off + d] += grad[d];
                    }
                }
            }
        }
    }

    let vectors = vocab
        .words
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w, input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    SgnsOutput {
        vectors,
        pairs_per_epoch,
    }
}
