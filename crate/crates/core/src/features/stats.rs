use crate::error::{Error, Result};

/// Percentile with linear interpolation between order statistics
/// (`sorted` must be ascending and non-empty).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Shannon entropy (bits) of the energy distribution `c_i^2 / sum c_j^2`.
/// An all-zero array has entropy 0.
pub fn energy_entropy(x: &[f64]) -> f64 {
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= 0.0 || !energy.is_finite() {
        return 0.0;
    }
    -x.iter()
        .map(|v| v * v / energy)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// `[p5, p25, p50, p75, p95, mean, std, var, skewness, kurtosis, entropy]`.
///
/// Moments are population moments; skewness is `m3 / m2^1.5` and kurtosis is
/// the excess `m4 / m2^2 - 3`, both 0 for constant arrays.
pub fn spectral_stats(x: &[f64]) -> Result<[f64; 11]> {
    if x.is_empty() {
        return Err(Error::Capability("statistics of an empty array".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let constant = sorted[0] == sorted[sorted.len() - 1] || m2 <= f64::MIN_POSITIVE;
    let (skew, kurt) = if constant {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Ok([
        percentile_sorted(&sorted, 0.05),
        percentile_sorted(&sorted, 0.25),
        percentile_sorted(&sorted, 0.50),
        percentile_sorted(&sorted, 0.75),
        percentile_sorted(&sorted, 0.95),
        mean,
        m2.sqrt(),
        m2,
        skew,
        kurt,
        energy_entropy(x),
    ])
}
