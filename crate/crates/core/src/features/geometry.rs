//! Per-trajectory series: straightness signature, turning angles, speed and
//! acceleration.

use std::f64::consts::{PI, TAU};

use crate::trajectory::{haversine_distance, initial_bearing, GeoPoint, Trajectory};

/// Number of distance-geometry levels; level `j` splits the path into `j` pieces.
pub const SIGNATURE_LEVELS: usize = 5;
/// 1 + 2 + 3 + 4 + 5.
pub const SIGNATURE_LEN: usize = SIGNATURE_LEVELS * (SIGNATURE_LEVELS + 1) / 2;

/// Chord length over path length for a run of points.
///
/// Returns `None` for fewer than two points and `1.0` for a path of zero
/// length (a stationary segment).
pub fn effective_distance_ratio(points: &[GeoPoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let path: f64 = points.windows(2).map(|w| haversine_distance(&w[0], &w[1])).sum();
    if path == 0.0 {
        return Some(1.0);
    }
    let chord = haversine_distance(&points[0], &points[points.len() - 1]);
    Some((chord / path).clamp(0.0, 1.0))
}

/// Straightness ratios at levels 1 through 5, flattened level by level
/// (`(1,1), (2,1), (2,2), (3,1), ...`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureSignature(pub [Option<f64>; SIGNATURE_LEN]);

impl CurvatureSignature {
    /// Entry for level `level` (1-based) and sub-segment `segment` (1-based).
    pub fn get(&self, level: usize, segment: usize) -> Option<f64> {
        assert!((1..=SIGNATURE_LEVELS).contains(&level) && (1..=level).contains(&segment));
        self.0[level * (level - 1) / 2 + segment - 1]
    }
}

/// Splits `n_points` into `parts` chained index ranges that share boundary
/// points. The `n_points - 1` edges are spread as evenly as possible, extra
/// edges going to the leading pieces. Pieces without an edge are `None`.
pub fn segment_bounds(n_points: usize, parts: usize) -> Vec<Option<(usize, usize)>> {
    let edges = n_points.saturating_sub(1);
    let base = edges / parts;
    let extra = edges % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let range = (len > 0).then_some((start, start + len));
            start += len;
            range
        })
        .collect()
}

pub fn distance_geometry_signature(t: &Trajectory) -> CurvatureSignature {
    let pts = t.points();
    let mut out = [None; SIGNATURE_LEN];
    let mut k = 0;
    for level in 1..=SIGNATURE_LEVELS {
        for bounds in segment_bounds(pts.len(), level) {
            out[k] = bounds.and_then(|(a, b)| effective_distance_ratio(&pts[a..=b]));
            k += 1;
        }
    }
    CurvatureSignature(out)
}

/// Unsigned turning angle in `[0, π]` at every interior point.
///
/// The heading into point `k` is the reverse of the initial bearing from
/// `k` back to `k - 1`, so points on one great circle turn by exactly zero.
/// A zero-length incoming or outgoing step contributes 0.
pub fn indentation_series(t: &Trajectory) -> Vec<f64> {
    t.points()
        .windows(3)
        .map(|w| {
            let (prev, here, next) = (&w[0], &w[1], &w[2]);
            if haversine_distance(prev, here) == 0.0 || haversine_distance(here, next) == 0.0 {
                return 0.0;
            }
            let heading_in = initial_bearing(here, prev) + PI;
            let heading_out = initial_bearing(here, next);
            let turn = (heading_out - heading_in).rem_euclid(TAU);
            if turn > PI {
                TAU - turn
            } else {
                turn
            }
        })
        .collect()
}

/// Meters per second over each consecutive pair of points.
pub fn speed_series(t: &Trajectory) -> Vec<f64> {
    t.points()
        .windows(2)
        .map(|w| haversine_distance(&w[0], &w[1]) / (w[1].timestamp - w[0].timestamp))
        .collect()
}

/// Change in speed between consecutive segments divided by the time between
/// the segments' midpoints.
pub fn acceleration_series(t: &Trajectory) -> Vec<f64> {
    let speeds = speed_series(t);
    let pts = t.points();
    let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0].timestamp + w[1].timestamp)).collect();
    speeds
        .windows(2)
        .zip(mids.windows(2))
        .map(|(s, m)| (s[1] - s[0]) / (m[1] - m[0]))
        .collect()
}
