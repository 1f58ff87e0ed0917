//! Per-class confusion counts and the macro, micro and weighted F1 scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ClassCounts {
    /// Actual occurrences of the class (`TP + FN`).
    pub fn support(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    /// `2TP / (2TP + FP + FN)`, or 0 when the denominator is 0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positives + self.false_positives + self.false_negatives;
        if denom == 0 {
            0.0
        } else {
            (2 * self.true_positives) as f64 / denom as f64
        }
    }
}

/// Counts for every class that occurs in the truth or in the predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub classes: BTreeMap<usize, ClassCounts>,
}

impl ConfusionCounts {
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidInput(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut classes: BTreeMap<usize, ClassCounts> = BTreeMap::new();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t == p {
                classes.entry(t).or_default().true_positives += 1;
            } else {
                classes.entry(t).or_default().false_negatives += 1;
                classes.entry(p).or_default().false_positives += 1;
            }
        }
        Ok(Self { classes })
    }

    pub fn from_counts(counts: impl IntoIterator<Item = ClassCounts>) -> Self {
        Self {
            classes: counts.into_iter().enumerate().collect(),
        }
    }

    pub fn total_support(&self) -> usize {
        self.classes.values().map(ClassCounts::support).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    #[serde(rename = "macro_f1")]
    pub macro_avg: f64,
    #[serde(rename = "micro_f1")]
    pub micro: f64,
    #[serde(rename = "weighted_f1")]
    pub weighted: f64,
}

pub fn f1_scores(c: &ConfusionCounts) -> Result<F1Scores> {
    let total_support = c.total_support();
    if total_support == 0 {
        return Err(Error::InvalidInput("F1 is undefined with zero total support".into()));
    }
    let n = c.classes.len() as f64;
    let macro_avg = c.classes.values().map(ClassCounts::f1).sum::<f64>() / n;
    let weighted = c
        .classes
        .values()
        .map(|k| k.support() as f64 * k.f1())
        .sum::<f64>()
        / total_support as f64;
    let (tp, fp, fn_) = c.classes.values().fold((0, 0, 0), |(a, b, d), k| {
        (a + k.true_positives, b + k.false_positives, d + k.false_negatives)
    });
    let micro_denom = 2 * tp + fp + fn_;
    let micro = if micro_denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / micro_denom as f64
    };
    Ok(F1Scores {
        macro_avg,
        micro,
        weighted,
    })
}

/// Weighted F1 straight from label sequences.
pub fn weighted_f1(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    Ok(f1_scores(&ConfusionCounts::from_predictions(truth, predicted)?)?.weighted)
}
