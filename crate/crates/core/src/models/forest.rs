use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{ClassificationTree, TreeConfig};

/// Maximum tree depth; `Unlimited` grows until leaves are pure or hold one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DepthRepr", into = "DepthRepr")]
pub enum Depth {
    Unlimited,
    Limit(usize),
}

impl Depth {
    pub fn as_option(self) -> Option<usize> {
        match self {
            Depth::Unlimited => None,
            Depth::Limit(d) => Some(d),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthRepr {
    Limit(usize),
    Named(String),
}

impl TryFrom<DepthRepr> for Depth {
    type Error = String;

    fn try_from(r: DepthRepr) -> Result<Self, String> {
        match r {
            DepthRepr::Limit(0) => Err("max_depth must be positive".into()),
            DepthRepr::Limit(d) => Ok(Depth::Limit(d)),
            DepthRepr::Named(s) if s.eq_ignore_ascii_case("none") => Ok(Depth::Unlimited),
            DepthRepr::Named(s) => Err(format!("max_depth `{s}` is neither an integer nor `none`")),
        }
    }
}

impl From<Depth> for DepthRepr {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Unlimited => DepthRepr::Named("none".into()),
            Depth::Limit(d) => DepthRepr::Limit(d),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRule {
    Sqrt,
    Log2,
}

/// Features examined per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeatures {
    Count(usize),
    Rule(FeatureRule),
}

impl MaxFeatures {
    /// Resolves against `d` columns: floor of the root or log, an absolute
    /// count capped at `d`, never below 1.
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Count(k) => k,
            MaxFeatures::Rule(FeatureRule::Sqrt) => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Rule(FeatureRule::Log2) => (d as f64).log2().floor() as usize,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Depth,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: Depth::Unlimited,
            max_features: MaxFeatures::Rule(FeatureRule::Sqrt),
        }
    }
}

/// Bagged Gini trees with per-split feature subsampling. Class
/// probabilities are averaged over trees.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    trees: Vec<ClassificationTree>,
    n_classes: usize,
}

impl RandomForest {
    pub fn fit(params: &ForestParams, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let n = x.nrows();
        let config = TreeConfig {
            max_depth: params.max_depth.as_option(),
            max_features: params.max_features.resolve(x.ncols()),
        };
        // Tree i draws from its own stream, so the first k trees do not
        // depend on n_estimators or on thread scheduling.
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                ClassificationTree::fit(x, y, n_classes, &rows, config, &mut rng)
            })
            .collect();
        Self { trees, n_classes }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[ClassificationTree] {
        &self.trees
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (row, mut acc) in x.rows().into_iter().zip(out.rows_mut()) {
            for tree in &self.trees {
                for (a, p) in acc.iter_mut().zip(tree.predict_row(row)) {
                    *a += p;
                }
            }
            acc /= self.trees.len().max(1) as f64;
        }
        out
    }
}
