//! Seeded stratified k-fold splitting and cross-validated scoring of a
//! scale-then-train pipeline.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ScaleState;
use crate::metrics::weighted_f1;
use crate::models::{train, ClassifierSpec};

/// Seeds taken from the decimal digits of π.
pub const DEFAULT_SEEDS: [u64; 4] = [14159, 26535, 89793, 23846];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvProtocol {
    pub seeds: Vec<u64>,
    pub folds: usize,
    #[serde(default)]
    pub tuned: bool,
}

impl Default for CvProtocol {
    fn default() -> Self {
        Self {
            seeds: DEFAULT_SEEDS.to_vec(),
            folds: DEFAULT_FOLDS,
            tuned: false,
        }
    }
}

impl CvProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Number of outer iterations per experiment cell.
    pub fn iterations(&self) -> usize {
        self.seeds.len() * self.folds
    }
}

/// Splits row indices into `k` test folds.
///
/// Each class is shuffled with a generator seeded by `seed` and dealt
/// round-robin, continuing from where the previous class stopped, so per-class
/// and total fold sizes both differ by at most one. Test folds are returned
/// with ascending indices.
pub fn stratified_kfold<L: Ord + Display>(labels: &[L], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class: class.to_string(),
            available: members.len(),
            required: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices in `0..n` not in the (sorted) test fold.
pub fn complement(test: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - test.len());
    let mut it = test.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Seed for the folds nested inside outer fold `fold` of seed `seed`.
pub fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64 + 1)
}

/// Stratified folds over one training table, reused to score many column
/// subsets and hyperparameter settings. Every model fit is counted.
pub struct CvScorer<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    splits: Vec<(Vec<usize>, Vec<usize>)>,
    fits: AtomicUsize,
}

impl<'a> CvScorer<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [usize], k: usize, seed: u64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        let splits = stratified_kfold(y, k, seed)?
            .into_iter()
            .map(|test| (complement(&test, y.len()), test))
            .collect();
        Ok(Self {
            x,
            y,
            splits,
            fits: AtomicUsize::new(0),
        })
    }

    pub fn folds(&self) -> usize {
        self.splits.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Model fits performed so far.
    pub fn fit_count(&self) -> usize {
        self.fits.load(Ordering::Relaxed)
    }

    /// Mean weighted F1 over the folds for the given columns.
    pub fn score(&self, spec: &ClassifierSpec, columns: &[usize]) -> Result<f64> {
        let x = self.x.select(Axis(1), columns);
        let mut total = 0.0;
        for (train_rows, test_rows) in &self.splits {
            let x_train = x.select(Axis(0), train_rows);
            let x_test = x.select(Axis(0), test_rows);
            let y_train: Vec<usize> = train_rows.iter().map(|&i| self.y[i]).collect();
            let y_test: Vec<usize> = test_rows.iter().map(|&i| self.y[i]).collect();
            let scaler = ScaleState::fit(x_train.view());
            self.fits.fetch_add(1, Ordering::Relaxed);
            let model = train(spec, scaler.transform(x_train.view()).view(), &y_train)?;
            let predicted = model.predict(scaler.transform(x_test.view()).view())?;
            total += weighted_f1(&y_test, &predicted)?;
        }
        Ok(total / self.splits.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_division() {
        let labels: Vec<char> = std::iter::repeat('A').take(40).chain(std::iter::repeat('B').take(40)).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| labels[i] == 'A').count(), 8);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 'B').count(), 8);
        }
    }

    #[test]
    fn fox_counts() {
        let labels: Vec<&str> = std::iter::repeat("F").take(38).chain(std::iter::repeat("M").take(28)).collect();
        let folds = stratified_kfold(&labels, 5, 14159).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..66).collect::<Vec<_>>());
        for f in &folds {
            let females = f.iter().filter(|&&i| labels[i] == "F").count();
            assert!((7..=8).contains(&females));
            assert!((5..=6).contains(&(f.len() - females)));
        }
        assert_eq!(folds, stratified_kfold(&labels, 5, 14159).unwrap());
        assert_ne!(folds, stratified_kfold(&labels, 5, 26535).unwrap());
    }

    #[test]
    fn too_small_class_named() {
        let labels = ["a", "a", "a", "b", "b"];
        match stratified_kfold(&labels, 3, 0).unwrap_err() {
            Error::ClassTooSmall { class, .. } => assert_eq!(class, "b"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn complement_of_fold() {
        assert_eq!(complement(&[1, 3], 5), vec![0, 2, 4]);
        assert_eq!(complement(&[], 2), vec![0, 1]);
    }

    #[test]
    fn protocol_defaults() {
        let p = CvProtocol::default();
        assert_eq!(p.iterations(), 20);
        assert!(p.validate().is_ok());
        assert!(CvProtocol { folds: 1, ..p.clone() }.validate().is_err());
        assert!(CvProtocol { seeds: vec![], ..p }.validate().is_err());
    }
}
