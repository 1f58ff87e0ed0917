//! Labeled trajectories: parsing, normalization, resampling and the
//! spherical primitives the feature extractors are built on.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64, timestamp: f64) -> Result<Self> {
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::InvalidInput(format!("latitude {latitude} out of range")));
        }
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidInput(format!("longitude {longitude} out of range")));
        }
        if !timestamp.is_finite() {
            return Err(Error::InvalidInput(format!("timestamp {timestamp} is not finite")));
        }
        Ok(Self {
            latitude,
            longitude,
            timestamp,
        })
    }

    /// Builds a point without range checks. Intended for synthetic data.
    pub const fn new_unchecked(latitude: f64, longitude: f64, timestamp: f64) -> Self {
        Self {
            latitude,
            longitude,
            timestamp,
        }
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let phi1 = a.latitude.to_radians();
    let phi2 = b.latitude.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.longitude - a.longitude).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial bearing from `a` towards `b`, radians clockwise from north in (-π, π].
pub fn initial_bearing(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let phi1 = a.latitude.to_radians();
    let phi2 = b.latitude.to_radians();
    let dlambda = (b.longitude - a.longitude).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    y.atan2(x)
}

/// A chronologically ordered, labeled trajectory with strictly increasing
/// timestamps and at least two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    id: String,
    label: String,
    points: Vec<GeoPoint>,
}

impl Trajectory {
    /// Sorts points by timestamp (stable) and drops every point whose
    /// timestamp repeats an earlier one.
    pub fn new(id: impl Into<String>, label: impl Into<String>, mut points: Vec<GeoPoint>) -> Result<Self> {
        let id = id.into();
        points.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        points.dedup_by(|later, earlier| later.timestamp == earlier.timestamp);
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory `{id}` has {} distinct timestamps, at least 2 required",
                points.len()
            )));
        }
        Ok(Self {
            id,
            label: label.into(),
            points,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn with_id(&self, id: String) -> Self {
        Self {
            id,
            label: self.label.clone(),
            points: self.points.clone(),
        }
    }
}

/// Trajectories keyed by unique id, kept in id order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LabeledTrajectorySet {
    trajectories: Vec<Trajectory>,
    label_counts: BTreeMap<String, usize>,
}

impl LabeledTrajectorySet {
    pub fn new(mut trajectories: Vec<Trajectory>) -> Result<Self> {
        trajectories.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = trajectories.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidInput(format!("duplicate trajectory id `{}`", w[0].id)));
        }
        let mut label_counts = BTreeMap::new();
        for t in &trajectories {
            *label_counts.entry(t.label.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            trajectories,
            label_counts,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn label_counts(&self) -> &BTreeMap<String, usize> {
        &self.label_counts
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

fn default_delimiter() -> char {
    ','
}

/// Names of the input CSV columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub trajectory_id: String,
    pub latitude: String,
    pub longitude: String,
    pub timestamp: String,
    pub label: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            trajectory_id: "trajectory_id".into(),
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            timestamp: "timestamp".into(),
            label: "label".into(),
            delimiter: default_delimiter(),
        }
    }
}

impl ColumnMapping {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Config(format!("delimiter {:?} is not a single ASCII byte", self.delimiter)))
    }
}

/// Row-level diagnostics collected while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub bad_coordinates: usize,
    pub bad_timestamps: usize,
    pub malformed: usize,
    pub label_conflicts: usize,
    pub duplicate_timestamps: usize,
    /// Ids of trajectories dropped for having fewer than two distinct timestamps.
    pub short_trajectories: Vec<String>,
}

/// Parses a timestamp given as epoch seconds, RFC 3339, or a naive
/// `YYYY-MM-DD[T ]HH:MM:SS[.f]` / `YYYY-MM-DD` value interpreted as UTC.
pub fn parse_timestamp(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    if let Ok(v) = raw.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(epoch_seconds(&dt.naive_utc()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(epoch_seconds(&dt));
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| epoch_seconds(&dt))
}

fn epoch_seconds(dt: &NaiveDateTime) -> f64 {
    let utc = dt.and_utc();
    utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9
}

/// Reads delimited text into a [`LabeledTrajectorySet`].
///
/// Rows with unparseable or out-of-range fields are skipped and counted in
/// the returned [`ParseReport`]; a missing required column is a schema
/// error and a file without any usable trajectory is an empty-input error.
pub fn parse_trajectory_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<(LabeledTrajectorySet, ParseReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter_byte()?)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let id_col = find(&mapping.trajectory_id)?;
    let lat_col = find(&mapping.latitude)?;
    let lon_col = find(&mapping.longitude)?;
    let ts_col = find(&mapping.timestamp)?;
    let label_col = find(&mapping.label)?;

    let mut report = ParseReport::default();
    let mut groups: BTreeMap<String, (String, Vec<GeoPoint>)> = BTreeMap::new();
    for record in rdr.records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                log::debug!("row {}: {e}", report.rows_read);
                report.malformed += 1;
                report.rows_rejected += 1;
                continue;
            }
        };
        let field = |i: usize| record.get(i).filter(|s| !s.is_empty());
        let (Some(id), Some(label), Some(lat), Some(lon), Some(ts)) =
            (field(id_col), field(label_col), field(lat_col), field(lon_col), field(ts_col))
        else {
            report.malformed += 1;
            report.rows_rejected += 1;
            continue;
        };
        let Some(timestamp) = parse_timestamp(ts) else {
            report.bad_timestamps += 1;
            report.rows_rejected += 1;
            continue;
        };
        let point = match (lat.parse::<f64>(), lon.parse::<f64>()) {
            (Ok(lat), Ok(lon)) => GeoPoint::new(lat, lon, timestamp).ok(),
            _ => None,
        };
        let Some(point) = point else {
            report.bad_coordinates += 1;
            report.rows_rejected += 1;
            continue;
        };
        let entry = groups
            .entry(id.to_string())
            .or_insert_with(|| (label.to_string(), Vec::new()));
        if entry.0 != label {
            report.label_conflicts += 1;
            report.rows_rejected += 1;
            continue;
        }
        entry.1.push(point);
    }

    let mut trajectories = Vec::with_capacity(groups.len());
    for (id, (label, points)) in groups {
        let raw_len = points.len();
        let distinct: BTreeSet<u64> = points.iter().map(|p| p.timestamp.to_bits()).collect();
        report.duplicate_timestamps += raw_len - distinct.len();
        match Trajectory::new(id.clone(), label, points) {
            Ok(t) => trajectories.push(t),
            Err(_) => {
                log::warn!("trajectory `{id}` dropped: fewer than 2 distinct timestamps");
                report.short_trajectories.push(id);
            }
        }
    }
    if trajectories.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no valid trajectories ({} rows read, {} rejected)",
            report.rows_read, report.rows_rejected
        )));
    }
    Ok((LabeledTrajectorySet::new(trajectories)?, report))
}

/// Writes a set in the same layout [`parse_trajectory_csv`] reads, with
/// timestamps as epoch seconds.
pub fn write_trajectory_csv<W: Write>(writer: W, set: &LabeledTrajectorySet, mapping: &ColumnMapping) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(mapping.delimiter_byte()?)
        .from_writer(writer);
    wtr.write_record([
        &mapping.trajectory_id,
        &mapping.latitude,
        &mapping.longitude,
        &mapping.timestamp,
        &mapping.label,
    ])?;
    for t in set.trajectories() {
        for p in t.points() {
            wtr.write_record([
                t.id(),
                &p.latitude.to_string(),
                &p.longitude.to_string(),
                &p.timestamp.to_string(),
                t.label(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<trajectory writer>", e))?;
    Ok(())
}

/// Class-balanced resampling options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleOptions {
    pub per_class: usize,
    /// Keep only the most frequent classes (ties broken by label).
    #[serde(default)]
    pub top_classes: Option<usize>,
    /// Draw with replacement; duplicated trajectories get a `#n` id suffix.
    #[serde(default)]
    pub replace: bool,
    #[serde(default = "default_resample_seed")]
    pub seed: u64,
}

fn default_resample_seed() -> u64 {
    42
}

/// Draws exactly `per_class` trajectories from each retained class.
pub fn resample_set(set: &LabeledTrajectorySet, options: &ResampleOptions) -> Result<LabeledTrajectorySet> {
    let mut classes: Vec<(&String, usize)> = set.label_counts().iter().map(|(k, &v)| (k, v)).collect();
    classes.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(top) = options.top_classes {
        classes.truncate(top);
    }
    classes.sort_by(|a, b| a.0.cmp(b.0));

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut out = Vec::with_capacity(classes.len() * options.per_class);
    for (label, count) in classes {
        let members: Vec<&Trajectory> = set.trajectories().iter().filter(|t| &t.label == label).collect();
        if options.replace {
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for _ in 0..options.per_class {
                let t = members[rng.gen_range(0..members.len())];
                let n = seen.entry(t.id()).or_insert(0);
                *n += 1;
                out.push(if *n == 1 {
                    t.clone()
                } else {
                    t.with_id(format!("{}#{}", t.id(), n))
                });
            }
        } else {
            if count < options.per_class {
                return Err(Error::ClassTooSmall {
                    class: label.clone(),
                    available: count,
                    required: options.per_class,
                });
            }
            out.extend(
                members
                    .choose_multiple(&mut rng, options.per_class)
                    .map(|t| (*t).clone()),
            );
        }
    }
    LabeledTrajectorySet::new(out)
}
