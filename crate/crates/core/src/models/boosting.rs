//! Gradient-boosted regression trees on the softmax cross-entropy.
//!
//! Each round fits one tree per class to the first and second derivatives
//! of the loss, using exact greedy split search and Newton leaf weights
//! `-G / (H + lambda)` scaled by the learning rate.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax_in_place;

/// L2 penalty on leaf weights.
const LAMBDA: f64 = 1.0;
/// Minimum hessian mass per child.
const MIN_CHILD_WEIGHT: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    #[serde(rename = "sub_sample")]
    pub subsample: f64,
}

impl Default for BoostedParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.3,
            subsample: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum RegNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct RegressionTree {
    nodes: Vec<RegNode>,
}

impl RegressionTree {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                RegNode::Leaf(w) => return *w,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenNode {
    node: usize,
    grad: f64,
    hess: f64,
    best: Option<Candidate>,
}

/// Level-wise exact greedy growth. `sorted[f]` lists all rows ordered by
/// feature `f`; `slot[r]` is the open node holding row `r` (or `usize::MAX`
/// when the row is not in this tree's sample).
fn grow_tree(
    x: ArrayView2<'_, f64>,
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    sample: &[bool],
    max_depth: usize,
    learning_rate: f64,
) -> RegressionTree {
    const NONE: usize = usize::MAX;
    let n = x.nrows();
    let mut slot = vec![NONE; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for r in 0..n {
        if sample[r] {
            slot[r] = 0;
            g0 += grad[r];
            h0 += hess[r];
        }
    }
    let mut nodes = vec![RegNode::Leaf(0.0)];
    let mut open = vec![OpenNode {
        node: 0,
        grad: g0,
        hess: h0,
        best: None,
    }];
    let leaf_weight = |g: f64, h: f64| -g / (h + LAMBDA) * learning_rate;

    for _depth in 0..max_depth {
        if open.is_empty() {
            break;
        }
        let m = open.len();
        let mut gl = vec![0.0; m];
        let mut hl = vec![0.0; m];
        let mut last = vec![f64::NAN; m];
        for (f, order) in sorted.iter().enumerate() {
            gl.fill(0.0);
            hl.fill(0.0);
            last.fill(f64::NAN);
            for &r in order {
                let a = slot[r];
                if a == NONE {
                    continue;
                }
                let v = x[[r, f]];
                let prev = last[a];
                if !prev.is_nan() && v > prev {
                    let node = &mut open[a];
                    let (gr, hr) = (node.grad - gl[a], node.hess - hl[a]);
                    if hl[a] >= MIN_CHILD_WEIGHT && hr >= MIN_CHILD_WEIGHT {
                        let gain = 0.5
                            * (gl[a] * gl[a] / (hl[a] + LAMBDA) + gr * gr / (hr + LAMBDA)
                                - node.grad * node.grad / (node.hess + LAMBDA));
                        if gain > MIN_GAIN && node.best.map_or(true, |b| gain > b.gain) {
                            let mid = prev + (v - prev) / 2.0;
                            node.best = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: if mid < v { mid } else { prev },
                            });
                        }
                    }
                }
                gl[a] += grad[r];
                hl[a] += hess[r];
                last[a] = v;
            }
        }

        let mut next = Vec::new();
        let mut remap = vec![NONE; m];
        for (a, node) in open.iter().enumerate() {
            match node.best {
                None => nodes[node.node] = RegNode::Leaf(leaf_weight(node.grad, node.hess)),
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(RegNode::Leaf(0.0));
                    nodes.push(RegNode::Leaf(0.0));
                    nodes[node.node] = RegNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    remap[a] = next.len();
                    next.push(OpenNode {
                        node: left,
                        grad: 0.0,
                        hess: 0.0,
                        best: None,
                    });
                    next.push(OpenNode {
                        node: left + 1,
                        grad: 0.0,
                        hess: 0.0,
                        best: None,
                    });
                }
            }
        }
        for r in 0..n {
            let a = slot[r];
            if a == NONE {
                continue;
            }
            slot[r] = match (open[a].best, remap[a]) {
                (Some(c), base) if base != NONE => {
                    let child = if x[[r, c.feature]] <= c.threshold { base } else { base + 1 };
                    next[child].grad += grad[r];
                    next[child].hess += hess[r];
                    child
                }
                _ => NONE,
            };
        }
        open = next;
    }
    for node in &open {
        nodes[node.node] = RegNode::Leaf(leaf_weight(node.grad, node.hess));
    }
    RegressionTree { nodes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Booster {
    /// `rounds[i][k]` is round `i`'s tree for class `k`.
    rounds: Vec<Vec<RegressionTree>>,
    n_classes: usize,
}

impl Booster {
    pub fn fit(params: &BoostedParams, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let n = x.nrows();
        let sorted: Vec<Vec<usize>> = (0..x.ncols())
            .map(|f| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
                order
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut margin = Array2::<f64>::zeros((n, n_classes));
        let mut proba = Array2::<f64>::zeros((n, n_classes));
        let mut grad = vec![vec![0.0; n]; n_classes];
        let mut hess = vec![vec![0.0; n]; n_classes];
        let mut rounds = Vec::with_capacity(params.n_estimators);

        for _ in 0..params.n_estimators {
            proba.assign(&margin);
            for mut row in proba.rows_mut() {
                softmax_in_place(row.as_slice_mut().expect("contiguous row"));
            }
            for r in 0..n {
                for k in 0..n_classes {
                    let p = proba[[r, k]];
                    let target = if y[r] == k { 1.0 } else { 0.0 };
                    grad[k][r] = p - target;
                    hess[k][r] = (2.0 * p * (1.0 - p)).max(1e-16);
                }
            }
            let sample: Vec<bool> = if params.subsample < 1.0 {
                (0..n).map(|_| rng.gen::<f64>() < params.subsample).collect()
            } else {
                vec![true; n]
            };
            let trees: Vec<RegressionTree> = (0..n_classes)
                .map(|k| grow_tree(x, &sorted, &grad[k], &hess[k], &sample, params.max_depth, params.learning_rate))
                .collect();
            for (r, row) in x.axis_iter(Axis(0)).enumerate() {
                for (k, tree) in trees.iter().enumerate() {
                    margin[[r, k]] += tree.predict_row(row);
                }
            }
            rounds.push(trees);
        }
        Self { rounds, n_classes }
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (row, mut acc) in x.rows().into_iter().zip(out.rows_mut()) {
            for trees in &self.rounds {
                for (a, tree) in acc.iter_mut().zip(trees) {
                    *a += tree.predict_row(row);
                }
            }
            softmax_in_place(acc.as_slice_mut().expect("contiguous row"));
        }
        out
    }
}
