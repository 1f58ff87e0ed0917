//! Seeded, stratified, cross-validated comparison of selectors and model
//! families.
//!
//! For every seed and outer fold, the fold's complement is the training
//! portion. Imputation, selection (with its own inner folds), optional grid
//! search and scaling are all fitted there before the held-out fold is
//! scored.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use indexmap::IndexMap;
use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{complement, inner_seed, stratified_kfold, CvProtocol};
use crate::error::{Error, Result};
use crate::features::{impute_fit_transform, FeatureMatrix, ScaleState};
use crate::metrics::{f1_scores, ConfusionCounts};
use crate::models::{grid_search, train, ClassifierSpec, Family, HyperGrid, ModelParams, TrainedModel};
use crate::selection::{select, Method, SelectionConfig, SelectionOutcome, DEFAULT_TOLERANCE};
use crate::taxonomy::Taxonomy;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub dataset: String,
    pub methods: Vec<Method>,
    pub families: Vec<Family>,
    pub tuned: Vec<bool>,
    pub protocol: CvProtocol,
    pub tolerance: f64,
    pub grid: HyperGrid,
    pub taxonomy: Taxonomy,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            methods: Method::ALL.to_vec(),
            families: Family::ALL.to_vec(),
            tuned: vec![false, true],
            protocol: CvProtocol::default(),
            tolerance: DEFAULT_TOLERANCE,
            grid: HyperGrid::default(),
            taxonomy: Taxonomy::builtin(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if self.methods.is_empty() || self.families.is_empty() || self.tuned.is_empty() {
            return Err(Error::Config("methods, families and tuned flags must be non-empty".into()));
        }
        if self.tolerance.is_nan() {
            return Err(Error::Config("selection tolerance must be a number".into()));
        }
        for family in &self.families {
            if self.tuned.contains(&true) && self.grid.candidates(*family).is_empty() {
                return Err(Error::Config(format!("empty hyperparameter grid for {family}")));
            }
        }
        Ok(())
    }

    /// Number of (method, family, tuned) cells.
    pub fn cells(&self) -> usize {
        self.methods.len() * self.families.len() * self.tuned.len()
    }
}

/// Identifies one outer iteration of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IterationKey {
    pub seed: u64,
    pub fold: usize,
    pub method: Method,
    pub family: Family,
    pub tuned: bool,
}

impl IterationKey {
    fn describe(&self) -> String {
        format!(
            "seed {}, fold {}, method {}, family {}, tuned {}",
            self.seed, self.fold, self.method, self.family, self.tuned
        )
    }
}

/// Seconds spent in each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    pub selection: f64,
    pub tuning: f64,
    pub training: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub dataset: String,
    pub seed: u64,
    pub fold: usize,
    pub method: Method,
    pub family: Family,
    pub tuned: bool,
    pub chosen_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_leaves: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_label: Option<String>,
    /// Inner-CV score of the chosen subset.
    pub selection_score: f64,
    /// Inner-CV score of every taxonomy combination, keyed by label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_scores: Option<IndexMap<String, f64>>,
    pub hyperparameters: ModelParams,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub selection_fits: usize,
    pub tuning_fits: usize,
    /// Selection, tuning and the final fit together.
    pub fit_count: usize,
    /// Wall-clock timings vary between runs, so they are kept out of the
    /// results file and written separately.
    #[serde(skip)]
    pub durations: Durations,
}

impl IterationResult {
    pub fn key(&self) -> IterationKey {
        IterationKey {
            seed: self.seed,
            fold: self.fold,
            method: self.method,
            family: self.family,
            tuned: self.tuned,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationFailure {
    pub dataset: String,
    #[serde(flatten)]
    pub key: IterationKey,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<IterationResult>,
    pub failures: Vec<IterationFailure>,
}

/// One outer training/test split after imputation fitted on the training rows.
pub struct OuterSplit {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub y_train: Vec<usize>,
    pub y_test: Vec<usize>,
}

/// Outer test folds for one seed.
pub fn outer_folds(data: &FeatureMatrix, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    stratified_kfold(data.labels(), folds, seed)
}

pub fn prepare_split(data: &FeatureMatrix, test_rows: &[usize]) -> OuterSplit {
    let ids = data.class_ids();
    let train_rows = complement(test_rows, data.n_rows());
    let (train, test, _) = impute_fit_transform(&data.select_rows(&train_rows), &data.select_rows(test_rows));
    OuterSplit {
        train,
        test,
        y_train: train_rows.iter().map(|&r| ids[r]).collect(),
        y_test: test_rows.iter().map(|&r| ids[r]).collect(),
    }
}

/// Tuning, final training and held-out scoring for an already selected subset.
fn finish(
    plan: &ExperimentPlan,
    key: IterationKey,
    split: &OuterSplit,
    selection: &SelectionOutcome,
) -> Result<(IterationResult, TrainedModel)> {
    let seed = inner_seed(key.seed, key.fold);
    let cols = &selection.chosen_columns;
    let x_train = split.train.values().select(Axis(1), cols);
    let x_test = split.test.values().select(Axis(1), cols);

    let tune_start = Instant::now();
    let (spec, tuning_fits) = if key.tuned {
        let out = grid_search(key.family, &plan.grid, x_train.view(), &split.y_train, plan.protocol.folds, seed)?;
        (out.best, out.fit_count)
    } else {
        (ClassifierSpec::default_for(key.family, seed), 0)
    };
    let tuning = tune_start.elapsed().as_secs_f64();

    let train_start = Instant::now();
    let scaler = ScaleState::fit(x_train.view());
    let model = train(&spec, scaler.transform(x_train.view()).view(), &split.y_train)?;
    let predicted = model.predict(scaler.transform(x_test.view()).view())?;
    let scores = f1_scores(&ConfusionCounts::from_predictions(&split.y_test, &predicted)?)?;
    let training = train_start.elapsed().as_secs_f64();

    let result = IterationResult {
        dataset: plan.dataset.clone(),
        seed: key.seed,
        fold: key.fold,
        method: key.method,
        family: key.family,
        tuned: key.tuned,
        chosen_columns: selection.chosen_column_names.clone(),
        chosen_leaves: selection.chosen_leaves.clone(),
        chosen_label: selection.chosen_label.clone(),
        selection_score: selection.best_score,
        candidate_scores: (key.method == Method::Taxonomy).then(|| selection.candidate_scores.clone()),
        hyperparameters: spec.params.clone(),
        weighted_f1: scores.weighted,
        macro_f1: scores.macro_avg,
        micro_f1: scores.micro,
        selection_fits: selection.fit_count,
        tuning_fits,
        fit_count: selection.fit_count + tuning_fits + 1,
        durations: Durations {
            selection: selection.wall_time,
            tuning,
            training,
        },
    };
    Ok((result, model))
}

fn run_selection(plan: &ExperimentPlan, key: IterationKey, split: &OuterSplit) -> Result<SelectionOutcome> {
    let seed = inner_seed(key.seed, key.fold);
    let config = SelectionConfig {
        folds: plan.protocol.folds,
        seed,
        tolerance: plan.tolerance,
    };
    select(
        key.method,
        &ClassifierSpec::default_for(key.family, seed),
        &split.train,
        &plan.taxonomy,
        &config,
    )
}

/// Runs a single iteration and also returns the final trained model.
pub fn run_iteration(plan: &ExperimentPlan, data: &FeatureMatrix, key: IterationKey) -> Result<(IterationResult, TrainedModel)> {
    let run = || {
        let folds = outer_folds(data, plan.protocol.folds, key.seed)?;
        let test_rows = folds
            .get(key.fold)
            .ok_or_else(|| Error::InvalidInput(format!("fold {} out of range", key.fold)))?;
        let split = prepare_split(data, test_rows);
        let selection = run_selection(plan, key, &split)?;
        finish(plan, key, &split, &selection)
    };
    run().map_err(|e| e.context(key.describe()))
}

/// Runs every seed x fold x method x family x tuned iteration. Selection does
/// not depend on the tuned flag, so it runs once and is shared by both.
/// Failed iterations are collected rather than aborting the run; results and
/// failures come back ordered by seed (protocol order), fold, method, family
/// and tuned flag.
pub fn run_experiment(data: &FeatureMatrix, plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    if data.classes().len() < 2 {
        return Err(Error::Degenerate("experiment requires at least 2 classes".into()));
    }
    let splits: Vec<Vec<OuterSplit>> = plan
        .protocol
        .seeds
        .iter()
        .map(|&seed| {
            let folds = outer_folds(data, plan.protocol.folds, seed)?;
            Ok(folds.iter().map(|test| prepare_split(data, test)).collect())
        })
        .collect::<Result<_>>()?;

    let mut groups = Vec::new();
    for (si, &seed) in plan.protocol.seeds.iter().enumerate() {
        for fold in 0..plan.protocol.folds {
            for &method in &plan.methods {
                for &family in &plan.families {
                    groups.push((si, seed, fold, method, family));
                }
            }
        }
    }

    let outcomes: Vec<Vec<std::result::Result<IterationResult, IterationFailure>>> = groups
        .into_par_iter()
        .map(|(si, seed, fold, method, family)| {
            let split = &splits[si][fold];
            let keys: Vec<IterationKey> = plan
                .tuned
                .iter()
                .map(|&tuned| IterationKey {
                    seed,
                    fold,
                    method,
                    family,
                    tuned,
                })
                .collect();
            let fail = |key: IterationKey, e: Error| IterationFailure {
                dataset: plan.dataset.clone(),
                key,
                error: e.context(key.describe()).to_string(),
            };
            match run_selection(plan, keys[0], split) {
                Err(e) => {
                    let msg = e.to_string();
                    keys.iter().map(|&k| Err(fail(k, Error::InvalidInput(msg.clone())))).collect()
                }
                Ok(selection) => keys
                    .iter()
                    .map(|&k| finish(plan, k, split, &selection).map(|(r, _)| r).map_err(|e| fail(k, e)))
                    .collect(),
            }
        })
        .collect();

    let mut out = ExperimentOutput::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => out.results.push(r),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// One (dataset, family, method, tuned) cell of the summary table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub family: Family,
    pub method: Method,
    pub tuned: bool,
}

impl CellKey {
    pub fn of(r: &IterationResult) -> Self {
        Self {
            dataset: r.dataset.clone(),
            family: r.family,
            method: r.method,
            tuned: r.tuned,
        }
    }
}

/// Median weighted F1 per cell. Cells without results are absent.
pub fn median_summary(results: &[IterationResult]) -> BTreeMap<CellKey, f64> {
    let mut groups: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in results {
        groups.entry(CellKey::of(r)).or_default().push(r.weighted_f1);
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| median(&v).map(|m| (k, m)))
        .collect()
}

pub fn write_results_jsonl<W: Write>(mut writer: W, results: &[IterationResult]) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut writer, r)?;
        writeln!(writer).map_err(|e| Error::io("results", e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TimingLine<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    key: IterationKey,
    #[serde(flatten)]
    durations: Durations,
}

pub fn write_timings_jsonl<W: Write>(mut writer: W, results: &[IterationResult]) -> Result<()> {
    for r in results {
        let line = TimingLine {
            dataset: &r.dataset,
            key: r.key(),
            durations: r.durations,
        };
        serde_json::to_writer(&mut writer, &line)?;
        writeln!(writer).map_err(|e| Error::io("timings", e))?;
    }
    Ok(())
}

pub fn write_failures_jsonl<W: Write>(mut writer: W, failures: &[IterationFailure]) -> Result<()> {
    for f in failures {
        serde_json::to_writer(&mut writer, f)?;
        writeln!(writer).map_err(|e| Error::io("failures", e))?;
    }
    Ok(())
}

/// Parses results, skipping lines that do not decode. Returns the results
/// and the number of skipped lines; a file with no decodable line is an error.
pub fn read_results_jsonl<R: BufRead>(reader: R) -> Result<(Vec<IterationResult>, usize)> {
    let mut results = Vec::new();
    let mut skipped = 0;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("results", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<IterationResult>(&line) {
            Ok(r) => results.push(r),
            Err(_) => skipped += 1,
        }
    }
    if results.is_empty() {
        return Err(if skipped == 0 {
            Error::EmptyInput("results file has no records".into())
        } else {
            Error::Schema(format!("none of the {skipped} result lines could be parsed"))
        });
    }
    Ok((results, skipped))
}

/// Inclusive bounds on model fits for one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub min: usize,
    pub max: usize,
}

impl FitRange {
    pub fn exact(n: usize) -> Self {
        Self { min: n, max: n }
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.min..=self.max).contains(&n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedCell {
    pub method: Method,
    pub family: Family,
    pub tuned: bool,
    pub iterations: usize,
    pub selection_fits: FitRange,
    pub tuning_fits: usize,
    /// Per iteration, including the final fit.
    pub fit_count: FitRange,
}

/// Fit counts of one selector on `d` columns with `folds` inner folds.
pub fn selection_fit_range(method: Method, d: usize, folds: usize, combinations: usize) -> FitRange {
    match method {
        Method::Taxonomy => FitRange::exact(combinations * folds),
        Method::Forward => FitRange {
            min: folds * (d + d.saturating_sub(1)),
            max: folds * d * (d + 1) / 2,
        },
        Method::Backward if d <= 1 => FitRange::exact(folds),
        Method::Backward => FitRange {
            min: folds * (1 + d),
            max: folds * (d * (d + 1) / 2),
        },
    }
}

/// Expected fit counts per cell for a matrix with `n_columns` columns.
pub fn plan_fit_counts(plan: &ExperimentPlan, n_columns: usize) -> Vec<PlannedCell> {
    let folds = plan.protocol.folds;
    let combos = plan.taxonomy.combinations().len();
    let mut out = Vec::new();
    for &method in &plan.methods {
        for &family in &plan.families {
            for &tuned in &plan.tuned {
                let selection_fits = selection_fit_range(method, n_columns, folds, combos);
                let tuning_fits = match plan.grid.candidates(family).len() {
                    n if tuned && n > 1 => n * folds,
                    _ => 0,
                };
                out.push(PlannedCell {
                    method,
                    family,
                    tuned,
                    iterations: plan.protocol.iterations(),
                    selection_fits,
                    tuning_fits,
                    fit_count: FitRange {
                        min: selection_fits.min + tuning_fits + 1,
                        max: selection_fits.max + tuning_fits + 1,
                    },
                });
            }
        }
    }
    out
}
