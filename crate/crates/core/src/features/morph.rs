use super::peaks::RPeakTrain;
use super::stats::percentile_sorted;
use crate::signal::{EcgRecording, LEAD_II};

/// Encoded value of a missing age. The scaler replaces it with the
/// federation-wide median.
pub const MISSING_AGE: f64 = -1.0;

fn summary(values: &[f64]) -> [f64; 5] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    [
        mean,
        percentile_sorted(&sorted, 0.5),
        var.sqrt(),
        sorted[0],
        sorted[sorted.len() - 1],
    ]
}

/// The 14 rhythm/demographic features, in registry order:
/// `[age, sex, hr_mean, rr_mean, rr_median, rr_std, rr_min, rr_max,
///   ramp_mean, ramp_median, ramp_std, ramp_min, ramp_max, n_beats]`.
///
/// RR statistics are over consecutive peak gaps (seconds) and amplitudes are
/// lead II samples at the peaks (mV). With fewer than two peaks every RR and
/// amplitude statistic is 0.
pub fn morphological_features(rec: &EcgRecording, peaks: &RPeakTrain) -> [f64; 14] {
    let mut out = [0.0; 14];
    out[0] = rec.age().unwrap_or(MISSING_AGE);
    out[1] = rec.sex().encode();
    out[13] = peaks.len() as f64;
    if peaks.len() < 2 {
        return out;
    }
    let rr = peaks.rr_intervals();
    let rr_stats = summary(&rr);
    out[2] = 60.0 / rr_stats[0];
    out[3..8].copy_from_slice(&rr_stats);
    let lead = rec.channel(LEAD_II);
    let amps: Vec<f64> = peaks.indices().iter().map(|&i| lead[i]).collect();
    out[8..13].copy_from_slice(&summary(&amps));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::detect_r_peaks;
    use crate::signal::{synth_generate, DiagnosisCode, Sex, LEADS};

    #[test]
    fn nsr_rr_mean_close_to_one_second() {
        for seed in 1..4 {
            let s = synth_generate(DiagnosisCode::NSR, seed, 257.0, 16.0).unwrap();
            let peaks = detect_r_peaks(s.recording.channel(LEAD_II), 257.0).unwrap();
            let f = morphological_features(&s.recording, &peaks);
            assert!((f[3] - 1.0).abs() <= 0.05, "rr_mean {}", f[3]);
            assert!((f[2] - 60.0).abs() <= 3.5, "hr {}", f[2]);
        }
    }

    #[test]
    fn empty_train_gives_sentinels() {
        let rec = crate::signal::EcgRecording::new(
            "x",
            vec![vec![0.0; 600]; LEADS],
            257.0,
            Some(70.0),
            Sex::Female,
            DiagnosisCode::NSR,
        )
        .unwrap();
        let f = morphological_features(&rec, &RPeakTrain::empty(257.0));
        assert_eq!(f[0], 70.0);
        assert_eq!(f[1], 0.0);
        assert!(f[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_gaps_have_zero_std() {
        let fs = 100.0;
        let mut lead = vec![0.0; 1000];
        for i in (50..1000).step_by(100) {
            lead[i] = 1.5;
        }
        let rec = crate::signal::EcgRecording::new(
            "t",
            vec![lead; LEADS],
            fs,
            None,
            Sex::Male,
            DiagnosisCode::NSR,
        )
        .unwrap();
        let idx: Vec<usize> = (50..1000).step_by(100).collect();
        let f = morphological_features(&rec, &RPeakTrain::new(idx, fs, 1000).unwrap());
        assert_eq!(f[0], MISSING_AGE);
        assert_eq!(f[5], 0.0);
        assert_eq!(f[3], 1.0);
        assert_eq!(f[2], 60.0);
        assert_eq!(f[8], 1.5);
        assert_eq!(f[10], 0.0);
        assert_eq!(f[13], 10.0);
    }
}
