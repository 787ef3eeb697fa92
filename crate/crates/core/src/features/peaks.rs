//! Pan-Tompkins style R-peak detection.
//!
//! Band-pass 5-15 Hz (zero-phase), five-point derivative, squaring, 150 ms
//! moving-window integration, then dual adaptive thresholds with a 200 ms
//! refractory period and search-back for missed beats. Detections are
//! finally snapped to the largest raw sample near the integrator peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RPeakTrain {
    indices: Vec<usize>,
    fs: f64,
}

impl RPeakTrain {
    /// Fails unless indices are strictly increasing and below `len`.
    pub fn new(indices: Vec<usize>, fs: f64, len: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema("R-peak indices must be strictly increasing".into()));
        }
        if indices.last().is_some_and(|&i| i >= len) {
            return Err(Error::Schema("R-peak index beyond signal end".into()));
        }
        Ok(Self { indices, fs })
    }

    pub fn empty(fs: f64) -> Self {
        Self {
            indices: Vec::new(),
            fs,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Consecutive peak gaps in seconds.
    pub fn rr_intervals(&self) -> Vec<f64> {
        self.indices
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / self.fs)
            .collect()
    }
}

/// RBJ biquad coefficients `(b, a)` with `a0` normalized to 1.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butter(fs: f64, cutoff: f64, highpass: bool) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + z1;
            z1 = self.b[1] * *v - self.a[0] * y + z2;
            z2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }
}

/// Zero-phase 5-15 Hz band-pass with reflected padding at both ends.
pub fn bandpass(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let pad = (fs as usize).min(n.saturating_sub(1));
    let mut buf = Vec::with_capacity(n + 2 * pad);
    // odd reflection keeps the signal continuous at the edges
    buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    let stages = [
        Biquad::butter(fs, 5.0, true),
        Biquad::butter(fs, 15.0, false),
    ];
    for s in &stages {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in &stages {
        s.run(&mut buf);
    }
    buf.reverse();
    buf[pad..pad + n].to_vec()
}

fn moving_average_centered(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    let half = width / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

/// Detects R peaks on one channel. Requires at least two seconds of signal.
pub fn detect_r_peaks(channel: &[f64], fs: f64) -> Result<RPeakTrain> {
    let n = channel.len();
    if !(fs > 0.0) || (n as f64) < 2.0 * fs {
        return Err(Error::Capability(format!(
            "peak detection needs at least 2 s of signal, got {n} samples at {fs} Hz"
        )));
    }
    let bp = bandpass(channel, fs);
    let deriv: Vec<f64> = (0..n)
        .map(|i| {
            let at = |k: isize| bp[(i as isize + k).clamp(0, n as isize - 1) as usize];
            (2.0 * at(2) + at(1) - at(-1) - 2.0 * at(-2)) * fs / 8.0
        })
        .collect();
    let squared: Vec<f64> = deriv.iter().map(|v| v * v).collect();
    let width = ((0.15 * fs).round() as usize).max(1);
    let mwi = moving_average_centered(&squared, width);

    let peak_max = mwi.iter().cloned().fold(0.0, f64::max);
    if !(peak_max > 0.0) {
        return Ok(RPeakTrain::empty(fs));
    }

    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .collect();

    let refractory = (0.2 * fs).round() as usize;
    let learn = ((2.0 * fs) as usize).min(n);
    let mut spki = 0.25 * mwi[..learn].iter().cloned().fold(0.0, f64::max);
    let mut npki = 0.5 * mwi[..learn].iter().sum::<f64>() / learn as f64;
    let threshold = |s: f64, nk: f64| nk + 0.25 * (s - nk);

    let mut qrs: Vec<usize> = Vec::new();
    for (ci, &i) in candidates.iter().enumerate() {
        let amp = mwi[i];
        let thr1 = threshold(spki, npki);
        if amp <= thr1 {
            npki = 0.125 * amp + 0.875 * npki;
            continue;
        }
        if let Some(&last) = qrs.last() {
            if i - last < refractory {
                if amp > mwi[last] {
                    *qrs.last_mut().expect("non-empty") = i;
                    spki = 0.125 * amp + 0.875 * spki;
                }
                continue;
            }
            // search back for a missed beat when the gap is unusually long
            let rr: Vec<usize> = qrs.windows(2).rev().take(8).map(|w| w[1] - w[0]).collect();
            if !rr.is_empty() {
                let rr_avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
                if (i - last) as f64 > 1.66 * rr_avg {
                    let thr2 = 0.5 * thr1;
                    let missed = candidates[..ci]
                        .iter()
                        .copied()
                        .filter(|&c| c >= last + refractory && c + refractory <= i)
                        .filter(|&c| mwi[c] > thr2)
                        .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]).then(b.cmp(&a)));
                    if let Some(m) = missed {
                        qrs.push(m);
                        spki = 0.25 * mwi[m] + 0.75 * spki;
                    }
                }
            }
        }
        qrs.push(i);
        spki = 0.125 * amp + 0.875 * spki;
    }

    // snap to the raw maximum near each integrator peak
    let half = ((0.12 * fs).round() as usize).max(1);
    let mut snapped: Vec<usize> = Vec::with_capacity(qrs.len());
    for &q in &qrs {
        let lo = q.saturating_sub(half);
        let hi = (q + half + 1).min(n);
        let r = (lo..hi)
            .max_by(|&a, &b| channel[a].total_cmp(&channel[b]).then(b.cmp(&a)))
            .expect("non-empty window");
        match snapped.last() {
            Some(&prev) if r <= prev || r - prev < refractory => {
                if channel[r] > channel[prev] {
                    *snapped.last_mut().expect("non-empty") = r;
                }
            }
            _ => snapped.push(r),
        }
    }
    RPeakTrain::new(snapped, fs, n)
}
