//! Mean imputation and z-scoring. Statistics always come from the training
//! rows only and are then applied unchanged to held-out rows.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputeState {
    pub means: Vec<f64>,
    /// Columns with no observed training value; these are filled with 0.
    pub all_missing: Vec<usize>,
}

impl ImputeState {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mut means = Vec::with_capacity(x.ncols());
        let mut all_missing = Vec::new();
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let (sum, n) = col
                .iter()
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                all_missing.push(j);
                means.push(0.0);
            } else {
                means.push(sum / n as f64);
            }
        }
        Self { means, all_missing }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (mut col, &mean) in out.axis_iter_mut(Axis(1)).zip(&self.means) {
            col.mapv_inplace(|v| if v.is_nan() { mean } else { v });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleState {
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
}

impl ScaleState {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means.push(mean);
            stds.push(var.sqrt());
        }
        Self { means, stds }
    }

    /// Zero-variance columns map to 0.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for ((mut col, &mean), &std) in out.axis_iter_mut(Axis(1)).zip(&self.means).zip(&self.stds) {
            if std > 0.0 {
                col.mapv_inplace(|v| (v - mean) / std);
            } else {
                col.fill(0.0);
            }
        }
        out
    }
}

pub fn impute_fit_transform(train: &FeatureMatrix, test: &FeatureMatrix) -> (FeatureMatrix, FeatureMatrix, ImputeState) {
    let state = ImputeState::fit(train.values().view());
    if !state.all_missing.is_empty() {
        log::warn!(
            "{} column(s) entirely missing in training rows, filled with 0",
            state.all_missing.len()
        );
    }
    let tr = train.replace_values(state.transform(train.values().view()), true, train.is_scaled());
    let te = test.replace_values(state.transform(test.values().view()), true, test.is_scaled());
    (tr, te, state)
}

pub fn standardize_fit_transform(train: &FeatureMatrix, test: &FeatureMatrix) -> (FeatureMatrix, FeatureMatrix, ScaleState) {
    debug_assert!(train.missing_count() == 0, "standardize after imputation");
    let state = ScaleState::fit(train.values().view());
    let tr = train.replace_values(state.transform(train.values().view()), train.is_imputed(), true);
    let te = test.replace_values(state.transform(test.values().view()), test.is_imputed(), true);
    (tr, te, state)
}
