use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    BoostedParams, ClassifierSpec, Depth, Family, FeatureRule, ForestParams, LogisticParams, MaxFeatures, MlpParams,
    ModelParams, Penalty, Solver,
};
use crate::cv::CvScorer;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticGrid {
    pub c: Vec<f64>,
    pub penalty: Vec<Penalty>,
    pub solver: Vec<Solver>,
}

impl Default for LogisticGrid {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0],
            penalty: vec![Penalty::L1, Penalty::L2],
            solver: vec![Solver::Liblinear, Solver::Saga],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Depth>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![100, 500, 1000],
            max_depth: vec![Depth::Unlimited, Depth::Limit(10), Depth::Limit(20)],
            max_features: vec![
                MaxFeatures::Rule(FeatureRule::Sqrt),
                MaxFeatures::Rule(FeatureRule::Log2),
                MaxFeatures::Count(16),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostedGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub sub_sample: Vec<f64>,
}

impl Default for BoostedGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![100, 500, 1000],
            max_depth: vec![3, 6, 10],
            learning_rate: vec![0.01, 0.1],
            sub_sample: vec![0.8, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpGrid {
    pub hidden_layer_sizes: Vec<Vec<usize>>,
    pub alpha: Vec<f64>,
    pub learning_rate_init: Vec<f64>,
}

impl Default for MlpGrid {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![vec![50], vec![100], vec![50, 50]],
            alpha: vec![1e-4, 1e-3, 1e-2],
            learning_rate_init: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

/// Candidate values per family. Defaults reproduce the published tuning grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub logistic_regression: LogisticGrid,
    pub random_forest: ForestGrid,
    pub gradient_boosted_trees: BoostedGrid,
    pub mlp: MlpGrid,
}

impl HyperGrid {
    /// Cartesian product in declaration order, first parameter outermost.
    pub fn candidates(&self, family: Family) -> Vec<ModelParams> {
        let mut out = Vec::new();
        match family {
            Family::LogisticRegression => {
                let g = &self.logistic_regression;
                for &c in &g.c {
                    for &penalty in &g.penalty {
                        for &solver in &g.solver {
                            out.push(ModelParams::LogisticRegression(LogisticParams { c, penalty, solver }));
                        }
                    }
                }
            }
            Family::RandomForest => {
                let g = &self.random_forest;
                for &n_estimators in &g.n_estimators {
                    for &max_depth in &g.max_depth {
                        for &max_features in &g.max_features {
                            out.push(ModelParams::RandomForest(ForestParams {
                                n_estimators,
                                max_depth,
                                max_features,
                            }));
                        }
                    }
                }
            }
            Family::GradientBoostedTrees => {
                let g = &self.gradient_boosted_trees;
                for &n_estimators in &g.n_estimators {
                    for &max_depth in &g.max_depth {
                        for &learning_rate in &g.learning_rate {
                            for &subsample in &g.sub_sample {
                                out.push(ModelParams::GradientBoostedTrees(BoostedParams {
                                    n_estimators,
                                    max_depth,
                                    learning_rate,
                                    subsample,
                                }));
                            }
                        }
                    }
                }
            }
            Family::Mlp => {
                let g = &self.mlp;
                for hidden in &g.hidden_layer_sizes {
                    for &alpha in &g.alpha {
                        for &learning_rate_init in &g.learning_rate_init {
                            out.push(ModelParams::Mlp(MlpParams {
                                hidden_layer_sizes: hidden.clone(),
                                alpha,
                                learning_rate_init,
                            }));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSearchOutcome {
    pub best: ClassifierSpec,
    /// Mean CV weighted F1 of every candidate, in enumeration order. Empty
    /// when the grid has a single candidate.
    pub scores: Vec<(ModelParams, f64)>,
    pub fit_count: usize,
}

/// Exhaustive search scored by stratified-CV weighted F1; ties keep the
/// earliest candidate.
pub fn grid_search(
    family: Family,
    grid: &HyperGrid,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    folds: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    let candidates = grid.candidates(family);
    match candidates.len() {
        0 => return Err(Error::Config(format!("empty hyperparameter grid for {family}"))),
        1 => {
            return Ok(GridSearchOutcome {
                best: ClassifierSpec::new(candidates.into_iter().next().expect("one candidate"), seed),
                scores: Vec::new(),
                fit_count: 0,
            })
        }
        _ => {}
    }
    let scorer = CvScorer::new(x, y, folds, seed)?;
    let all: Vec<usize> = (0..x.ncols()).collect();
    let scores = candidates
        .into_par_iter()
        .map(|params| {
            let s = scorer.score(&ClassifierSpec::new(params.clone(), seed), &all)?;
            Ok((params, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate() {
        if *s > scores[best].1 {
            best = i;
        }
    }
    Ok(GridSearchOutcome {
        best: ClassifierSpec::new(scores[best].0.clone(), seed),
        fit_count: scorer.fit_count(),
        scores,
    })
}
