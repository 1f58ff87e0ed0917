//! Seeded generators for datasets with a known planted signal.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::features::{ColumnMeta, FeatureMatrix};
use crate::trajectory::{GeoPoint, LabeledTrajectorySet, Trajectory};

/// Parameters of [`planted_speed_set`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpeed {
    /// Mean speed of each class in m/s; class `i` is labeled `class_i`.
    pub class_speeds: Vec<f64>,
    pub per_class: usize,
    pub points: usize,
    /// Seconds between fixes.
    pub interval: f64,
    /// Standard deviation of per-step speed noise, identical for every class.
    pub speed_noise: f64,
    /// Standard deviation of the heading change per step, in radians.
    pub turn_noise: f64,
    pub seed: u64,
}

impl Default for PlantedSpeed {
    fn default() -> Self {
        Self {
            class_speeds: vec![5.0, 10.0, 15.0, 20.0],
            per_class: 50,
            points: 40,
            interval: 60.0,
            speed_noise: 2.0,
            turn_noise: 0.6,
            seed: 7,
        }
    }
}

fn destination(p: &GeoPoint, bearing: f64, distance: f64, timestamp: f64) -> GeoPoint {
    let delta = distance / crate::trajectory::EARTH_RADIUS_M;
    let (lat1, lon1) = (p.latitude.to_radians(), p.longitude.to_radians());
    let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * bearing.cos()).asin();
    let lon2 = lon1 + (bearing.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
    GeoPoint::new_unchecked(lat2.to_degrees(), lon2.to_degrees(), timestamp)
}

/// Trajectories whose classes differ only in mean speed. Fix intervals,
/// turning behavior and noise levels are shared by all classes.
pub fn planted_speed_set(p: &PlantedSpeed) -> Result<LabeledTrajectorySet> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let speed_noise = Normal::new(0.0, p.speed_noise).expect("finite noise");
    let turn_noise = Normal::new(0.0, p.turn_noise).expect("finite noise");
    let mut out = Vec::new();
    for (c, &mean) in p.class_speeds.iter().enumerate() {
        for i in 0..p.per_class {
            let mut point = GeoPoint::new_unchecked(rng.gen_range(-40.0..40.0), rng.gen_range(-150.0..150.0), 0.0);
            let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut points = vec![point];
            for step in 1..p.points {
                heading += turn_noise.sample(&mut rng);
                let speed = (mean + speed_noise.sample(&mut rng)).max(0.1);
                point = destination(&point, heading, speed * p.interval, step as f64 * p.interval);
                points.push(point);
            }
            out.push(Trajectory::new(format!("c{c}_{i:04}"), format!("class_{c}"), points)?);
        }
    }
    LabeledTrajectorySet::new(out)
}

/// Gaussian feature matrix. Column `j` has class-dependent mean
/// `class * separation[j]` and unit variance, so a zero entry makes a
/// pure-noise column. Column `j` is named `f{j}` and tagged with `leaves[j]`.
pub fn gaussian_matrix(per_class: usize, classes: usize, separation: &[f64], leaves: &[&str], seed: u64) -> Result<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = per_class * classes;
    let d = separation.len();
    let mut values = Array2::zeros((n, d));
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        for i in 0..per_class {
            let r = c * per_class + i;
            ids.push(format!("r{r:05}"));
            labels.push(format!("k{c}"));
            for j in 0..d {
                values[[r, j]] = c as f64 * separation[j] + normal.sample(&mut rng);
            }
        }
    }
    let columns = (0..d)
        .map(|j| ColumnMeta {
            name: format!("f{j}"),
            leaf: leaves.get(j).map(|s| s.to_string()),
        })
        .collect();
    FeatureMatrix::new(ids, labels, columns, values)
}
