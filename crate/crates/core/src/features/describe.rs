use serde::{Deserialize, Serialize};

/// Column-name suffixes of the 19 descriptors, in output order.
pub const DESCRIPTOR_NAMES: [&str; 19] = [
    "unique_count",
    "zero_count",
    "mean",
    "std_err",
    "q01",
    "q05",
    "q25",
    "q50",
    "q75",
    "q95",
    "q99",
    "std",
    "cv",
    "mad",
    "iqr",
    "skewness",
    "kurtosis",
    "min",
    "max",
];

const QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

/// Distribution summary of a real-valued series. `None` marks a value that
/// is undefined for the series (empty input, zero spread, zero mean for the
/// coefficient of variation).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesDescriptor {
    pub unique_count: Option<f64>,
    pub zero_count: Option<f64>,
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub q01: Option<f64>,
    pub q05: Option<f64>,
    pub q25: Option<f64>,
    pub q50: Option<f64>,
    pub q75: Option<f64>,
    pub q95: Option<f64>,
    pub q99: Option<f64>,
    pub std: Option<f64>,
    pub cv: Option<f64>,
    pub mad: Option<f64>,
    pub iqr: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl SeriesDescriptor {
    /// Values in [`DESCRIPTOR_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 19] {
        [
            self.unique_count,
            self.zero_count,
            self.mean,
            self.std_err,
            self.q01,
            self.q05,
            self.q25,
            self.q50,
            self.q75,
            self.q95,
            self.q99,
            self.std,
            self.cv,
            self.mad,
            self.iqr,
            self.skewness,
            self.kurtosis,
            self.min,
            self.max,
        ]
    }
}

/// Linear interpolation between order statistics of an ascending slice
/// (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Summarizes a series.
///
/// Moments use the population convention: `std` divides by `n`, skewness is
/// `m3 / m2^1.5` and kurtosis is the excess `m4 / m2^2 - 3`. The median
/// absolute deviation is taken about the median. Everything is computed on a
/// sorted copy so the result does not depend on input order.
pub fn describe(series: &[f64]) -> SeriesDescriptor {
    if series.is_empty() {
        return SeriesDescriptor::default();
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;

    let mut unique = 1usize;
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            unique += 1;
        }
    }
    let zeros = sorted.iter().filter(|&&x| x == 0.0).count();
    let mean = sorted.iter().sum::<f64>() / n;
    let q: Vec<f64> = QUANTILES.iter().map(|&p| quantile_sorted(&sorted, p)).collect();

    let mut d = SeriesDescriptor {
        unique_count: Some(unique as f64),
        zero_count: Some(zeros as f64),
        mean: Some(mean),
        q01: Some(q[0]),
        q05: Some(q[1]),
        q25: Some(q[2]),
        q50: Some(q[3]),
        q75: Some(q[4]),
        q95: Some(q[5]),
        q99: Some(q[6]),
        min: Some(sorted[0]),
        max: Some(sorted[sorted.len() - 1]),
        ..Default::default()
    };
    if sorted.len() < 2 {
        return d;
    }

    let (m2, m3, m4) = sorted.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        let dev = x - mean;
        let sq = dev * dev;
        (a + sq, b + sq * dev, c + sq * sq)
    });
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let std = m2.sqrt();
    d.std = Some(std);
    d.std_err = Some(std / n.sqrt());
    d.cv = (mean != 0.0).then(|| std / mean);
    d.iqr = Some(q[4] - q[2]);
    let median = q[3];
    let mut abs_dev: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    abs_dev.sort_by(f64::total_cmp);
    d.mad = Some(quantile_sorted(&abs_dev, 0.5));
    if m2 > 0.0 {
        d.skewness = Some(m3 / m2.powf(1.5));
        d.kurtosis = Some(m4 / (m2 * m2) - 3.0);
    }
    d
}
