use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        proba: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree grown on Gini impurity.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationTree {
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    /// Non-constant features examined per split.
    pub max_features: usize,
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    config: TreeConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
    features: Vec<usize>,
    buf: Vec<(f64, usize)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, counts: &[usize], n: usize) -> usize {
        let proba = counts.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(Node::Leaf { proba });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let mut counts = vec![0usize; self.n_classes];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || n < 2 || depth_reached {
            return self.leaf(&counts, n);
        }
        let Some(best) = self.find_split(rows, &counts) else {
            return self.leaf(&counts, n);
        };

        let mut split = 0;
        for i in 0..n {
            if self.x[[rows[i], best.feature]] <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: Vec::new() });
        let (left_rows, right_rows) = rows.split_at_mut(split);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        idx
    }

    fn find_split(&mut self, rows: &[usize], counts: &[usize]) -> Option<BestSplit> {
        let d = self.features.len();
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut examined = 0;
        for i in 0..d {
            if examined >= self.config.max_features {
                break;
            }
            let j = self.rng.gen_range(i..d);
            self.features.swap(i, j);
            let f = self.features[i];

            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[n - 1].0 {
                continue;
            }
            examined += 1;

            // Maximizing sum_k(L_k^2)/n_L + sum_k(R_k^2)/n_R minimizes weighted Gini.
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.to_vec();
            let mut sq_left = 0.0;
            let mut sq_right: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
            for k in 0..n - 1 {
                let c = self.buf[k].1;
                sq_left += (2 * left[c] + 1) as f64;
                left[c] += 1;
                sq_right -= (2 * right[c] - 1) as f64;
                right[c] -= 1;
                let (v, next) = (self.buf[k].0, self.buf[k + 1].0);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let score = sq_left / nl + sq_right / (n as f64 - nl);
                if best.as_ref().map_or(true, |b| score > b.score) {
                    let mid = v + (next - v) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < next { mid } else { v },
                        score,
                    });
                }
            }
        }
        best
    }
}

impl ClassificationTree {
    /// Grows a tree on the given (possibly repeated) row indices.
    pub(crate) fn fit<R: Rng>(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        rows: &[usize],
        config: TreeConfig,
        rng: &mut R,
    ) -> Self {
        let mut builder = Builder {
            x,
            y,
            n_classes,
            config,
            rng,
            nodes: Vec::new(),
            features: (0..x.ncols()).collect(),
            buf: Vec::with_capacity(rows.len()),
        };
        let mut rows = rows.to_vec();
        builder.build(&mut rows, 0);
        Self { nodes: builder.nodes }
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> &[f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grow(x: ArrayView2<'_, f64>, y: &[usize], max_depth: Option<usize>) -> ClassificationTree {
        let rows: Vec<usize> = (0..y.len()).collect();
        let config = TreeConfig {
            max_depth,
            max_features: x.ncols(),
        };
        ClassificationTree::fit(x, y, 2, &rows, config, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn fits_xor_when_unlimited() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let tree = grow(x.view(), &y, None);
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(tree.predict_row(row)[label], 1.0);
        }
        assert_eq!(tree.n_leaves(), 4);
        assert_eq!(tree.depth(), 2);
    }

    #[test]
    fn depth_limit_and_constant_features() {
        let x = array![[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let y = [0, 0, 1, 1];
        let stump = grow(x.view(), &y, Some(1));
        assert_eq!(stump.depth(), 1);
        assert_eq!(stump.predict_row(array![1.4, 5.0].view()), &[1.0, 0.0]);
        let constant = array![[1.0], [1.0]];
        let leaf = grow(constant.view(), &[0, 1], None);
        assert_eq!(leaf.n_leaves(), 1);
        assert_eq!(leaf.predict_row(array![1.0].view()), &[0.5, 0.5]);
    }
}
