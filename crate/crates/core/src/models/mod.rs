//! Classifier families behind one train/predict interface.
//!
//! Labels are class ids (`usize`). A trained model remembers the sorted ids
//! it saw, and probability ties resolve to the smallest id, which is the
//! lexically smallest label when ids come from [`crate::features::FeatureMatrix::class_ids`].

mod boosting;
mod forest;
mod grid;
mod logistic;
pub mod mlp;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use boosting::{BoostedParams, Booster};
pub use forest::{Depth, FeatureRule, ForestParams, MaxFeatures, RandomForest};
pub use grid::{grid_search, BoostedGrid, ForestGrid, GridSearchOutcome, HyperGrid, LogisticGrid, MlpGrid};
pub use logistic::{LogisticModel, LogisticParams, Penalty, Solver};
pub use mlp::{MlpModel, MlpParams};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LogisticRegression,
    RandomForest,
    GradientBoostedTrees,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::LogisticRegression,
        Family::RandomForest,
        Family::GradientBoostedTrees,
        Family::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::LogisticRegression => "logistic_regression",
            Family::RandomForest => "random_forest",
            Family::GradientBoostedTrees => "gradient_boosted_trees",
            Family::Mlp => "mlp",
        }
    }

    /// Display name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Family::LogisticRegression => "Logistic Regression",
            Family::RandomForest => "Random Forest",
            Family::GradientBoostedTrees => "XGBoost",
            Family::Mlp => "MLP",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    LogisticRegression(LogisticParams),
    RandomForest(ForestParams),
    GradientBoostedTrees(BoostedParams),
    Mlp(MlpParams),
}

impl ModelParams {
    /// Untuned defaults of each family.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::LogisticRegression => ModelParams::LogisticRegression(LogisticParams::default()),
            Family::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            Family::GradientBoostedTrees => ModelParams::GradientBoostedTrees(BoostedParams::default()),
            Family::Mlp => ModelParams::Mlp(MlpParams::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelParams::LogisticRegression(_) => Family::LogisticRegression,
            ModelParams::RandomForest(_) => Family::RandomForest,
            ModelParams::GradientBoostedTrees(_) => Family::GradientBoostedTrees,
            ModelParams::Mlp(_) => Family::Mlp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn default_for(family: Family, seed: u64) -> Self {
        Self::new(ModelParams::default_for(family), seed)
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Fitted {
    Logistic(LogisticModel),
    Forest(RandomForest),
    Boosted(Booster),
    Mlp(MlpModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    spec: ClassifierSpec,
    classes: Vec<usize>,
    n_features: usize,
    fitted: Fitted,
}

impl TrainedModel {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    /// Class ids in column order of [`TrainedModel::predict_proba`].
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "model trained on {} columns, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(match &self.fitted {
            Fitted::Logistic(m) => m.predict_proba(x),
            Fitted::Forest(m) => m.predict_proba(x),
            Fitted::Boosted(m) => m.predict_proba(x),
            Fitted::Mlp(m) => m.predict_proba(x),
        })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let proba = self.predict_proba(x)?;
        Ok(proba
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (k, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    pub fn as_logistic(&self) -> Option<&LogisticModel> {
        match &self.fitted {
            Fitted::Logistic(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_forest(&self) -> Option<&RandomForest> {
        match &self.fitted {
            Fitted::Forest(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_booster(&self) -> Option<&Booster> {
        match &self.fitted {
            Fitted::Boosted(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_mlp(&self) -> Option<&MlpModel> {
        match &self.fitted {
            Fitted::Mlp(m) => Some(m),
            _ => None,
        }
    }
}

/// Fits a classifier. Deterministic for a given spec, including its seed.
pub fn train(spec: &ClassifierSpec, x: ArrayView2<'_, f64>, y: &[usize]) -> Result<TrainedModel> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("training data contains non-finite values".into()));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training requires at least 2 classes, got {}",
            classes.len()
        )));
    }
    let local: Vec<usize> = y.iter().map(|c| classes.binary_search(c).expect("seen class")).collect();
    let k = classes.len();
    let fitted = match &spec.params {
        ModelParams::LogisticRegression(p) => Fitted::Logistic(LogisticModel::fit(p, x, &local, k)),
        ModelParams::RandomForest(p) => Fitted::Forest(RandomForest::fit(p, x, &local, k, spec.seed)),
        ModelParams::GradientBoostedTrees(p) => Fitted::Boosted(Booster::fit(p, x, &local, k, spec.seed)),
        ModelParams::Mlp(p) => Fitted::Mlp(MlpModel::fit(p, x, &local, k, spec.seed)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        classes,
        n_features: x.ncols(),
        fitted,
    })
}

pub fn predict(model: &TrainedModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    model.predict(x)
}

/// Fraction of rows predicted correctly.
pub fn accuracy(model: &TrainedModel, x: ArrayView2<'_, f64>, y: &[usize]) -> Result<f64> {
    let p = model.predict(x)?;
    Ok(p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len().max(1) as f64)
}

/// Numerically stable in-place softmax of one row of scores.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
