//! Multilevel Daubechies-4 (8-tap) decomposition with half-sample symmetric
//! boundary extension. Output lengths and coefficient alignment follow the
//! common `wavedec(x, "db4", mode="symmetric")` convention:
//! each level yields `floor((n + 7) / 2)` coefficients.

use crate::error::{Error, Result};

/// db4 decomposition low-pass filter.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

/// Decomposition levels used for feature extraction.
pub const DWT_LEVELS: usize = 4;

/// db4 decomposition high-pass filter (quadrature mirror of the low-pass).
pub fn db4_dec_hi() -> [f64; 8] {
    let mut hi = [0.0; 8];
    for (k, v) in hi.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        *v = sign * DB4_DEC_LO[7 - k];
    }
    hi
}

/// Deepest level for which the filter still fits:
/// `floor(log2(n / (filter_len - 1)))`.
pub fn max_level(n: usize) -> usize {
    let ratio = n / (DB4_DEC_LO.len() - 1);
    if ratio == 0 {
        0
    } else {
        ratio.ilog2() as usize
    }
}

#[inline]
fn symmetric_index(mut i: isize, n: isize) -> usize {
    // Reflect about the half-sample boundaries until inside [0, n).
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// One analysis step: `(approximation, detail)`.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = DB4_DEC_LO;
    let hi = db4_dec_hi();
    let taps = lo.len();
    let n = x.len() as isize;
    let out_len = (x.len() + taps - 1) / 2;
    let mut ca = Vec::with_capacity(out_len);
    let mut cd = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let o = (2 * i + 1) as isize;
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..taps {
            let idx = o - k as isize;
            let v = if idx >= 0 && idx < n {
                x[idx as usize]
            } else {
                x[symmetric_index(idx, n)]
            };
            a += lo[k] * v;
            d += hi[k] * v;
        }
        ca.push(a);
        cd.push(d);
    }
    (ca, cd)
}

/// 4-level decomposition returning `[cA4, cD4, cD3, cD2, cD1]`.
pub fn dwt(x: &[f64]) -> Result<[Vec<f64>; 5]> {
    wavedec(x, DWT_LEVELS).map(|v| {
        let mut it = v.into_iter();
        std::array::from_fn(|_| it.next().expect("five arrays"))
    })
}

/// `levels`-deep decomposition returning `[cA_L, cD_L, ..., cD1]`.
pub fn wavedec(x: &[f64], levels: usize) -> Result<Vec<Vec<f64>>> {
    let deepest = max_level(x.len());
    if levels == 0 || levels > deepest {
        return Err(Error::Capability(format!(
            "signal of length {} supports at most {deepest} db4 levels, {levels} requested",
            x.len()
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = x.to_vec();
    for _ in 0..levels {
        let (a, d) = dwt_step(&approx);
        details.push(d);
        approx = a;
    }
    let mut out = Vec::with_capacity(levels + 1);
    out.push(approx);
    out.extend(details.into_iter().rev());
    Ok(out)
}
