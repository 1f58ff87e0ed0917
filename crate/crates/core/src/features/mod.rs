//! The 72-column movement feature vector: 15 straightness ratios followed by
//! 19 distribution descriptors for each of the turning-angle, speed and
//! acceleration series.

mod describe;
mod geometry;
mod matrix;
mod preprocess;

use rayon::prelude::*;

pub use describe::{describe, quantile_sorted, SeriesDescriptor, DESCRIPTOR_NAMES};
pub use geometry::{
    acceleration_series, distance_geometry_signature, effective_distance_ratio, indentation_series,
    segment_bounds, speed_series, CurvatureSignature, SIGNATURE_LEN, SIGNATURE_LEVELS,
};
pub use matrix::{ColumnMeta, FeatureMatrix, FeatureSidecar};
pub use preprocess::{impute_fit_transform, standardize_fit_transform, ImputeState, ScaleState};

use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use crate::trajectory::{LabeledTrajectorySet, Trajectory};

/// Total number of extracted features.
pub const FEATURE_COUNT: usize = SIGNATURE_LEN + 3 * DESCRIPTOR_NAMES.len();

pub const CURVATURE_PREFIX: &str = "dg_";
pub const INDENTATION_PREFIX: &str = "ang_";
pub const SPEED_PREFIX: &str = "spd_";
pub const ACCELERATION_PREFIX: &str = "acc_";

/// Column names in extraction order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for level in 1..=SIGNATURE_LEVELS {
        for segment in 1..=level {
            names.push(format!("{CURVATURE_PREFIX}l{level}_s{segment}"));
        }
    }
    for prefix in [INDENTATION_PREFIX, SPEED_PREFIX, ACCELERATION_PREFIX] {
        names.extend(DESCRIPTOR_NAMES.iter().map(|d| format!("{prefix}{d}")));
    }
    names
}

/// Feature values for one trajectory; `NaN` marks a missing value.
pub fn feature_vector(t: &Trajectory) -> Vec<f64> {
    let mut row = Vec::with_capacity(FEATURE_COUNT);
    row.extend(distance_geometry_signature(t).0.iter().map(|v| v.unwrap_or(f64::NAN)));
    for series in [indentation_series(t), speed_series(t), acceleration_series(t)] {
        row.extend(describe(&series).values().iter().map(|v| v.unwrap_or(f64::NAN)));
    }
    row
}

/// One row per trajectory (in id order), columns tagged with the built-in
/// taxonomy.
pub fn extract_features(set: &LabeledTrajectorySet) -> Result<FeatureMatrix> {
    extract_features_with(set, &Taxonomy::builtin())
}

pub fn extract_features_with(set: &LabeledTrajectorySet, taxonomy: &Taxonomy) -> Result<FeatureMatrix> {
    if set.is_empty() {
        return Err(Error::EmptyInput("no trajectories to extract features from".into()));
    }
    let rows: Vec<Vec<f64>> = set.trajectories().par_iter().map(feature_vector).collect();
    let columns = feature_names()
        .into_iter()
        .map(|name| ColumnMeta {
            leaf: taxonomy.leaf_for_column(&name).map(|l| l.name.clone()),
            name,
        })
        .collect();
    let values = ndarray::Array2::from_shape_vec((rows.len(), FEATURE_COUNT), rows.concat())
        .expect("every row has FEATURE_COUNT values");
    FeatureMatrix::new(
        set.trajectories().iter().map(|t| t.id().to_string()).collect(),
        set.trajectories().iter().map(|t| t.label().to_string()).collect(),
        columns,
        values,
    )
}
