use super::EcgRecording;
use crate::error::{Error, Result};

/// Linearly interpolates every channel onto a uniform grid at `target_fs`.
///
/// The output has `round(d * target_fs / fs)` samples (at least one); sample
/// `j` sits at time `j / target_fs`. Positions past the last input sample
/// hold the last value.
pub fn resample(rec: &EcgRecording, target_fs: f64) -> Result<EcgRecording> {
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::Argument(format!("target_fs must be > 0, got {target_fs}")));
    }
    let d = rec.len();
    let n_out = ((d as f64 * target_fs / rec.fs()).round() as usize).max(1);
    if n_out == d && target_fs == rec.fs() {
        return Ok(rec.clone());
    }
    let step = rec.fs() / target_fs;
    let channels = rec
        .channels()
        .iter()
        .map(|ch| {
            (0..n_out)
                .map(|j| {
                    let pos = j as f64 * step;
                    let i0 = pos.floor() as usize;
                    if i0 + 1 >= d {
                        return ch[d - 1];
                    }
                    let frac = pos - i0 as f64;
                    ch[i0] + frac * (ch[i0 + 1] - ch[i0])
                })
                .collect()
        })
        .collect();
    Ok(rec.with_channels(channels, target_fs))
}

/// Truncates (keeping the prefix) or zero-pads every channel to exactly
/// `round(seconds * fs)` samples.
pub fn fix_length(rec: &EcgRecording, seconds: f64) -> Result<EcgRecording> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::Argument(format!("seconds must be > 0, got {seconds}")));
    }
    let n = ((seconds * rec.fs()).round() as usize).max(1);
    let channels = rec
        .channels()
        .iter()
        .map(|ch| {
            let mut out = ch[..n.min(ch.len())].to_vec();
            out.resize(n, 0.0);
            out
        })
        .collect();
    Ok(rec.with_channels(channels, rec.fs()))
}
