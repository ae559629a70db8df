//! Gradient-boosted regression trees under logistic loss.
//!
//! Trees are grown level by level with exact greedy splits over presorted
//! inputs. Leaf weights and split gains use the second-order approximation
//! with L2 regularisation `lambda`: a leaf's weight is `-G / (H + lambda)` and
//! a split's gain is `GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub lambda: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
    /// Minimum gain for a split to be kept.
    pub min_split_gain: f64,
    /// Probability that a row takes part in a given round.
    pub subsample: f64,
    pub seed: u64,
    /// Inputs the trees may never split on.
    #[serde(default)]
    pub disabled_inputs: Vec<usize>,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 100,
            max_depth: 4,
            shrinkage: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            min_split_gain: 0.0,
            subsample: 1.0,
            seed: 0,
            disabled_inputs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoostError {
    #[error("no training rows")]
    Empty,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("row {row} has {found} inputs, expected {expected}")]
    Width {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row} has a non-finite input")]
    NonFinite { row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    Split {
        input: usize,
        /// Rows with `x[input] < threshold` go left.
        threshold: T,
        left: usize,
        right: usize,
        gain: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn predict(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    input,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*input] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster<T> {
    pub n_inputs: usize,
    /// Initial margin (log-odds of the positive rate).
    pub base_margin: T,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> Booster<T> {
    pub fn margin(&self, x: &[T]) -> T {
        self.trees
            .iter()
            .fold(self.base_margin, |acc, t| acc + t.predict(x))
    }

    /// Probability of the positive class.
    pub fn predict(&self, x: &[T]) -> T {
        self.margin(x).sigmoid()
    }

    /// Total split gain attributed to each input.
    pub fn gain_by_input(&self) -> Vec<T> {
        let mut gains = vec![T::zero(); self.n_inputs];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { input, gain, .. } = node {
                    gains[*input] += *gain;
                }
            }
        }
        gains
    }
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct Candidate<T> {
    gain: T,
    input: usize,
    threshold: T,
}

struct Open<T> {
    tree_index: usize,
    g: T,
    h: T,
    best: Option<Candidate<T>>,
}

pub fn train<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[bool],
    params: &BoostParams,
) -> Result<Booster<T>, BoostError> {
    assert_eq!(rows.len(), labels.len(), "one label per row");
    let n = rows.len();
    if n == 0 {
        return Err(BoostError::Empty);
    }
    let width = rows[0].len();
    for (row, x) in rows.iter().enumerate() {
        if x.len() != width {
            return Err(BoostError::Width {
                row,
                expected: width,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BoostError::NonFinite { row });
        }
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        return Err(BoostError::SingleClass);
    }

    let lambda = T::from_f64_lossy(params.lambda);
    let eta = T::from_f64_lossy(params.shrinkage);
    let mcw = T::from_f64_lossy(params.min_child_weight);
    let min_gain = T::from_f64_lossy(params.min_split_gain);
    let rate = positives as f64 / n as f64;
    let base_margin = T::from_f64_lossy((rate / (1.0 - rate)).ln());
    let y: Vec<T> = labels
        .iter()
        .map(|&l| if l { T::one() } else { T::zero() })
        .collect();

    let active: Vec<usize> = (0..width)
        .filter(|i| !params.disabled_inputs.contains(i))
        .collect();
    let sorted: Vec<Vec<usize>> = active
        .iter()
        .map(|&f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                rows[a][f]
                    .partial_cmp(&rows[b][f])
                    .expect("finite inputs")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut margin = vec![base_margin; n];
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    let mut node_of = vec![NONE; n];
    let mut trees = Vec::with_capacity(params.rounds);

    for _ in 0..params.rounds {
        for i in 0..n {
            let p = margin[i].sigmoid();
            grad[i] = p - y[i];
            hess[i] = (p * (T::one() - p)).max(T::from_f64_lossy(1e-16));
        }
        let sampled: Vec<bool> = if params.subsample < 1.0 {
            (0..n)
                .map(|_| rng.gen::<f64>() < params.subsample)
                .collect()
        } else {
            vec![true; n]
        };

        let mut nodes: Vec<Node<T>> = vec![Node::Leaf { value: T::zero() }];
        let (g0, h0) = (0..n)
            .filter(|&i| sampled[i])
            .fold((T::zero(), T::zero()), |(g, h), i| {
                (g + grad[i], h + hess[i])
            });
        let mut open = vec![Open {
            tree_index: 0,
            g: g0,
            h: h0,
            best: None,
        }];
        for i in 0..n {
            node_of[i] = if sampled[i] { 0 } else { NONE };
        }

        for _depth in 0..params.max_depth {
            if open.is_empty() {
                break;
            }
            find_splits(
                rows, &grad, &hess, &node_of, &active, &sorted, &mut open, lambda, mcw, min_gain,
            );
            // children of split nodes become the next level
            let mut next: Vec<Open<T>> = Vec::new();
            let mut remap = vec![NONE; open.len() * 2];
            for (k, node) in open.iter().enumerate() {
                match node.best {
                    Some(c) => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf { value: T::zero() });
                        nodes.push(Node::Leaf { value: T::zero() });
                        nodes[node.tree_index] = Node::Split {
                            input: c.input,
                            threshold: c.threshold,
                            left,
                            right: left + 1,
                            gain: c.gain,
                        };
                        remap[2 * k] = next.len();
                        next.push(Open {
                            tree_index: left,
                            g: T::zero(),
                            h: T::zero(),
                            best: None,
                        });
                        remap[2 * k + 1] = next.len();
                        next.push(Open {
                            tree_index: left + 1,
                            g: T::zero(),
                            h: T::zero(),
                            best: None,
                        });
                    }
                    None => {
                        nodes[node.tree_index] = Node::Leaf {
                            value: -node.g / (node.h + lambda) * eta,
                        };
                    }
                }
            }
            for i in 0..n {
                let k = node_of[i];
                if k == NONE {
                    continue;
                }
                node_of[i] = match open[k].best {
                    Some(c) => {
                        let side = if rows[i][c.input] < c.threshold { 0 } else { 1 };
                        let child = remap[2 * k + side];
                        next[child].g += grad[i];
                        next[child].h += hess[i];
                        child
                    }
                    None => NONE,
                };
            }
            open = next;
        }
        for node in &open {
            nodes[node.tree_index] = Node::Leaf {
                value: -node.g / (node.h + lambda) * eta,
            };
        }

        let tree = Tree { nodes };
        for i in 0..n {
            margin[i] += tree.predict(&rows[i]);
        }
        trees.push(tree);
    }

    Ok(Booster {
        n_inputs: width,
        base_margin,
        trees,
    })
}

#[allow(clippy::too_many_arguments)]
fn find_splits<T: Scalar>(
    rows: &[Vec<T>],
    grad: &[T],
    hess: &[T],
    node_of: &[usize],
    active: &[usize],
    sorted: &[Vec<usize>],
    open: &mut [Open<T>],
    lambda: T,
    mcw: T,
    min_gain: T,
) {
    let score = |g: T, h: T| g * g / (h + lambda);
    let parent: Vec<T> = open.iter().map(|o| score(o.g, o.h)).collect();
    let mut gl = vec![T::zero(); open.len()];
    let mut hl = vec![T::zero(); open.len()];
    let mut last: Vec<Option<T>> = vec![None; open.len()];

    for (&f, order) in active.iter().zip(sorted) {
        gl.iter_mut().for_each(|v| *v = T::zero());
        hl.iter_mut().for_each(|v| *v = T::zero());
        last.iter_mut().for_each(|v| *v = None);
        for &i in order {
            let k = node_of[i];
            if k == NONE {
                continue;
            }
            let x = rows[i][f];
            if let Some(prev) = last[k] {
                if x > prev {
                    let (g, h) = (open[k].g, open[k].h);
                    let (gr, hr) = (g - gl[k], h - hl[k]);
                    if hl[k] >= mcw && hr >= mcw {
                        let gain = score(gl[k], hl[k]) + score(gr, hr) - parent[k];
                        let better = open[k].best.is_none_or(|b| gain > b.gain);
                        if gain > min_gain && better {
                            open[k].best = Some(Candidate {
                                gain,
                                input: f,
                                threshold: x,
                            });
                        }
                    }
                }
            }
            gl[k] += grad[i];
            hl[k] += hess[i];
            last[k] = Some(x);
        }
    }
}
