//! Movement-trajectory features organized under a geometric/kinematic
//! taxonomy, and a cross-validated harness comparing taxonomy-combination
//! feature selection with forward and backward sequential selection.
//!
//! The pipeline runs in this order:
//!
//! 1. [`trajectory`]: parse and normalize labeled trajectories.
//! 2. [`features`]: 72 features per trajectory (curvature, indentation,
//!    speed, acceleration), mean imputation and standardization.
//! 3. [`taxonomy`]: leaf categories and their `2^n - 1` combinations.
//! 4. [`selection`]: forward, backward and taxonomy selectors.
//! 5. [`models`]: logistic regression, random forest, boosted trees, MLP.
//! 6. [`experiment`]: seeded stratified CV over every selector/model cell.
//! 7. [`report`]: medians, best category sets, frequencies and box plots.

pub mod config;
pub mod cv;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod models;
pub mod report;
pub mod selection;
pub mod synthetic;
pub mod taxonomy;
pub mod trajectory;

pub use error::{Error, Result};
