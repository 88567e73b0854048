//! Summary statistics and numeric formatting shared by the harness and CLI.

use factorate_core::math;

/// Format with 17 significant digits so every f64 round-trips exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Kolmogorov-Smirnov statistic of the sample against the standard normal.
pub fn ks_statistic_normal(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let cdf = math::normal_cdf(*z);
        let upper = (i as f64 + 1.0) / n - cdf;
        let lower = cdf - i as f64 / n;
        d = d.max(upper.abs()).max(lower.abs());
    }
    d
}
