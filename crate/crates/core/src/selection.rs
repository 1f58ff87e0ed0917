//! Wrapper feature selection: greedy forward addition, greedy backward
//! elimination, and exhaustive search over taxonomy category combinations.
//! Every candidate subset is scored by stratified-CV weighted F1 and every
//! model fit is counted.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use indexmap::IndexMap;
use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::CvScorer;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::ClassifierSpec;
use crate::taxonomy::{columns_for, Taxonomy};

/// Minimum weighted-F1 gain for a greedy step to be taken.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Forward,
    Backward,
    Taxonomy,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Forward, Method::Backward, Method::Taxonomy];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Forward => "forward",
            Method::Backward => "backward",
            Method::Taxonomy => "taxonomy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown selection method `{s}`")))
    }
}

/// Inner cross-validation used to score candidate subsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub folds: usize,
    pub seed: u64,
    /// A greedy step is taken only when it gains at least this much.
    pub tolerance: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            folds: crate::cv::DEFAULT_FOLDS,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub method: Method,
    /// Ascending column indices.
    pub chosen_columns: Vec<usize>,
    pub chosen_column_names: Vec<String>,
    /// Leaf names of the winning combination (taxonomy method only).
    pub chosen_leaves: Option<Vec<String>>,
    pub chosen_label: Option<String>,
    /// Mean CV score of the chosen subset.
    pub best_score: f64,
    /// Every evaluated candidate. Taxonomy keys are combination labels such
    /// as `C+S`; sequential keys look like `r2+spd_mean` (round 2, adding
    /// `spd_mean`), with `full` for backward's starting set.
    pub candidate_scores: IndexMap<String, f64>,
    pub fit_count: usize,
    /// Seconds.
    pub wall_time: f64,
}

fn check_data(data: &FeatureMatrix) -> Result<Vec<usize>> {
    if data.n_cols() == 0 {
        return Err(Error::InvalidInput("feature matrix has no columns".into()));
    }
    if data.missing_count() > 0 {
        return Err(Error::InvalidInput("feature matrix must be imputed before selection".into()));
    }
    if data.classes().len() < 2 {
        return Err(Error::Degenerate("selection requires at least 2 classes".into()));
    }
    Ok(data.class_ids())
}

fn score_all(
    scorer: &CvScorer<'_>,
    spec: &ClassifierSpec,
    subsets: Vec<Vec<usize>>,
) -> Result<Vec<f64>> {
    subsets.into_par_iter().map(|cols| scorer.score(spec, &cols)).collect()
}

/// First index holding the maximum; earlier entries win ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

fn names(data: &FeatureMatrix, cols: &[usize]) -> Vec<String> {
    cols.iter().map(|&c| data.columns()[c].name.clone()).collect()
}

/// Greedy forward selection. The first round always adds a column; later
/// rounds add the best column while it gains at least `tolerance`. Ties go
/// to the lowest column index.
pub fn forward_select(spec: &ClassifierSpec, data: &FeatureMatrix, config: &SelectionConfig) -> Result<SelectionOutcome> {
    let start = Instant::now();
    let y = check_data(data)?;
    let scorer = CvScorer::new(data.values().view(), &y, config.folds, config.seed)?;
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..data.n_cols()).collect();
    let mut current = f64::NEG_INFINITY;
    let mut candidate_scores = IndexMap::new();
    let mut round = 0;
    while !remaining.is_empty() {
        round += 1;
        let subsets: Vec<Vec<usize>> = remaining
            .iter()
            .map(|&c| {
                let mut s = selected.clone();
                s.push(c);
                s.sort_unstable();
                s
            })
            .collect();
        let scores = score_all(&scorer, spec, subsets)?;
        for (&c, &s) in remaining.iter().zip(&scores) {
            candidate_scores.insert(format!("r{round}+{}", data.columns()[c].name), s);
        }
        let best = argmax(&scores);
        if !selected.is_empty() && scores[best] - current < config.tolerance {
            break;
        }
        current = scores[best];
        selected.push(remaining.remove(best));
        selected.sort_unstable();
    }
    Ok(SelectionOutcome {
        method: Method::Forward,
        chosen_column_names: names(data, &selected),
        chosen_columns: selected,
        chosen_leaves: None,
        chosen_label: None,
        best_score: current,
        candidate_scores,
        fit_count: scorer.fit_count(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Greedy backward elimination from the full set. A column is removed when
/// the best removal gains at least `tolerance`; at least one column is kept.
/// Ties go to removing the lowest column index.
pub fn backward_select(spec: &ClassifierSpec, data: &FeatureMatrix, config: &SelectionConfig) -> Result<SelectionOutcome> {
    let start = Instant::now();
    let y = check_data(data)?;
    let scorer = CvScorer::new(data.values().view(), &y, config.folds, config.seed)?;
    let mut selected: Vec<usize> = (0..data.n_cols()).collect();
    let mut current = scorer.score(spec, &selected)?;
    let mut candidate_scores = IndexMap::new();
    candidate_scores.insert("full".to_string(), current);
    let mut round = 0;
    while selected.len() > 1 {
        round += 1;
        let subsets: Vec<Vec<usize>> = (0..selected.len())
            .map(|i| {
                let mut s = selected.clone();
                s.remove(i);
                s
            })
            .collect();
        let scores = score_all(&scorer, spec, subsets)?;
        for (&c, &s) in selected.iter().zip(&scores) {
            candidate_scores.insert(format!("r{round}-{}", data.columns()[c].name), s);
        }
        let best = argmax(&scores);
        if scores[best] - current < config.tolerance {
            break;
        }
        current = scores[best];
        selected.remove(best);
    }
    Ok(SelectionOutcome {
        method: Method::Backward,
        chosen_column_names: names(data, &selected),
        chosen_columns: selected,
        chosen_leaves: None,
        chosen_label: None,
        best_score: current,
        candidate_scores,
        fit_count: scorer.fit_count(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Scores every non-empty union of taxonomy leaves and keeps the best.
/// Ties go to the combination with fewer columns, then to enumeration order.
pub fn taxonomy_select(
    spec: &ClassifierSpec,
    data: &FeatureMatrix,
    taxonomy: &Taxonomy,
    config: &SelectionConfig,
) -> Result<SelectionOutcome> {
    let start = Instant::now();
    let y = check_data(data)?;
    let combos = taxonomy.combinations();
    let subsets = combos
        .iter()
        .map(|c| columns_for(c, data))
        .collect::<Result<Vec<_>>>()?;
    if let Some((combo, _)) = combos.iter().zip(&subsets).find(|(_, s)| s.is_empty()) {
        return Err(Error::Config(format!("taxonomy combination `{}` matches no columns", combo.label)));
    }
    let scorer = CvScorer::new(data.values().view(), &y, config.folds, config.seed)?;
    let scores = score_all(&scorer, spec, subsets.clone())?;
    let mut best = 0;
    for i in 1..combos.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && subsets[i].len() < subsets[best].len());
        if better {
            best = i;
        }
    }
    Ok(SelectionOutcome {
        method: Method::Taxonomy,
        chosen_column_names: names(data, &subsets[best]),
        chosen_columns: subsets[best].clone(),
        chosen_leaves: Some(combos[best].leaves.clone()),
        chosen_label: Some(combos[best].label.clone()),
        best_score: scores[best],
        candidate_scores: combos.iter().map(|c| c.label.clone()).zip(scores.iter().copied()).collect(),
        fit_count: scorer.fit_count(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

pub fn select(
    method: Method,
    spec: &ClassifierSpec,
    data: &FeatureMatrix,
    taxonomy: &Taxonomy,
    config: &SelectionConfig,
) -> Result<SelectionOutcome> {
    match method {
        Method::Forward => forward_select(spec, data, config),
        Method::Backward => backward_select(spec, data, config),
        Method::Taxonomy => taxonomy_select(spec, data, taxonomy, config),
    }
}

/// Inputs of the correlation-based subset merit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeritInputs {
    pub k: usize,
    /// Mean feature-class correlation.
    pub r_cf_bar: f64,
    /// Mean feature-feature correlation.
    pub r_ff_bar: f64,
}

/// `k * r_cf / sqrt(k + k (k - 1) r_ff)`.
pub fn cfs_merit(m: &MeritInputs) -> Result<f64> {
    if m.k == 0 {
        return Err(Error::InvalidInput("merit needs at least one feature".into()));
    }
    let k = m.k as f64;
    let denom = k + k * (k - 1.0) * m.r_ff_bar;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::UndefinedMerit(denom));
    }
    Ok(k * m.r_cf_bar / denom.sqrt())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Merit inputs for a column subset. Feature-class correlation is the
/// prior-weighted mean of absolute correlations with each one-vs-rest class
/// indicator; feature-feature correlation is the mean absolute pairwise
/// correlation (0 for a single column).
pub fn merit_inputs(x: ArrayView2<'_, f64>, y: &[usize], columns: &[usize]) -> Result<MeritInputs> {
    if columns.is_empty() {
        return Err(Error::InvalidInput("empty column subset".into()));
    }
    let n = y.len() as f64;
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let cols: Vec<Vec<f64>> = columns.iter().map(|&c| x.index_axis(Axis(1), c).to_vec()).collect();
    let indicators: Vec<(f64, Vec<f64>)> = classes
        .iter()
        .map(|&c| {
            let ind: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v == c))).collect();
            (ind.iter().sum::<f64>() / n, ind)
        })
        .collect();
    let r_cf_bar = cols
        .iter()
        .map(|f| indicators.iter().map(|(w, ind)| w * pearson(f, ind).abs()).sum::<f64>())
        .sum::<f64>()
        / cols.len() as f64;
    let mut pairs = 0usize;
    let mut total = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            total += pearson(&cols[i], &cols[j]).abs();
            pairs += 1;
        }
    }
    Ok(MeritInputs {
        k: cols.len(),
        r_cf_bar,
        r_ff_bar: if pairs == 0 { 0.0 } else { total / pairs as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn merit_examples() {
        let m = |k, r_cf_bar, r_ff_bar| {
            cfs_merit(&MeritInputs {
                k,
                r_cf_bar,
                r_ff_bar,
            })
            .unwrap()
        };
        assert_eq!(m(1, 0.5, 0.9), 0.5);
        assert!((m(2, 0.5, 0.0) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((m(2, 0.5, 1.0) - 0.5).abs() < 1e-12);
        let bad = MeritInputs {
            k: 3,
            r_cf_bar: 0.5,
            r_ff_bar: -0.6,
        };
        assert!(matches!(cfs_merit(&bad), Err(Error::UndefinedMerit(_))));
    }

    #[test]
    fn merit_inputs_on_duplicated_column() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let m = merit_inputs(x.view(), &[0, 0, 1, 1], &[0, 1]).unwrap();
        assert_eq!(m.k, 2);
        assert!((m.r_ff_bar - 1.0).abs() < 1e-12);
        assert!(m.r_cf_bar > 0.8);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }
}
