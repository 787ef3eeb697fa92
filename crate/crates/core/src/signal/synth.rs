//! Class-conditioned synthetic 12-lead ECG.
//!
//! Each beat is a sum of Gaussian P, Q, R, S and T bumps; every lead applies
//! its own gain to each wave. Rhythm (rate, beat-to-beat jitter, ectopic
//! beats, fibrillatory baseline) is drawn from a per-class [`RhythmProfile`].
//! Output is a pure function of `(profile, seed, fs, seconds)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DiagnosisCode, EcgRecording, Sex, LEADS};
use crate::error::{Error, Result};

/// Classes the generator can produce.
pub const SUPPORTED_CLASSES: [DiagnosisCode; 6] = [
    DiagnosisCode::NSR,
    DiagnosisCode::SB,
    DiagnosisCode::STach,
    DiagnosisCode::AF,
    DiagnosisCode::PAC,
    DiagnosisCode::VEB,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EctopicKind {
    /// Early beat with an abnormal P wave and a normal narrow QRS.
    Atrial,
    /// Early wide, high-amplitude beat without P wave, followed by a
    /// compensatory pause.
    Ventricular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ectopy {
    pub kind: EctopicKind,
    /// Normal beats between ectopics are drawn uniformly from this range.
    pub every: (usize, usize),
    /// RR of the ectopic beat as a fraction of the current normal RR.
    pub prematurity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmProfile {
    /// Mean heart rate in bpm.
    pub heart_rate: f64,
    /// Per-record relative spread of the rate (uniform, ±).
    pub rate_spread: f64,
    /// Beat-to-beat relative RR jitter (uniform, ±).
    pub rr_jitter: f64,
    pub p_wave: bool,
    /// Amplitude (mV) of fibrillatory baseline activity.
    pub fibrillation: f64,
    pub ectopy: Option<Ectopy>,
}

impl RhythmProfile {
    pub fn sinus(heart_rate: f64) -> Self {
        Self {
            heart_rate,
            rate_spread: 0.02,
            rr_jitter: 0.02,
            p_wave: true,
            fibrillation: 0.0,
            ectopy: None,
        }
    }

    pub fn for_class(class: DiagnosisCode) -> Result<Self> {
        use DiagnosisCode::*;
        let p = match class {
            NSR => Self::sinus(60.0),
            SB => Self {
                rate_spread: 0.03,
                ..Self::sinus(45.0)
            },
            STach => Self {
                rate_spread: 0.03,
                ..Self::sinus(120.0)
            },
            AF => Self {
                heart_rate: 95.0,
                rate_spread: 0.05,
                rr_jitter: 0.3,
                p_wave: false,
                fibrillation: 0.06,
                ectopy: None,
            },
            PAC => Self {
                rate_spread: 0.05,
                ectopy: Some(Ectopy {
                    kind: EctopicKind::Atrial,
                    every: (3, 5),
                    prematurity: 0.65,
                }),
                ..Self::sinus(72.0)
            },
            VEB => Self {
                rate_spread: 0.05,
                ectopy: Some(Ectopy {
                    kind: EctopicKind::Ventricular,
                    every: (3, 6),
                    prematurity: 0.7,
                }),
                ..Self::sinus(72.0)
            },
            other => {
                return Err(Error::Capability(format!(
                    "synthetic generator does not support class {other}"
                )))
            }
        };
        Ok(p)
    }
}

/// A generated recording plus its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticRecording {
    pub recording: EcgRecording,
    /// Sample index of every R peak that falls inside the recording.
    pub r_peaks: Vec<usize>,
    /// The record's drawn mean heart rate (bpm).
    pub heart_rate: f64,
}

// Per-lead gains for the P, Q, R, S and T waves (I, II, III, aVR, aVL, aVF, V1-V6).
const P_GAIN: [f64; LEADS] = [0.5, 1.0, 0.5, -0.7, 0.2, 0.7, 0.4, 0.5, 0.5, 0.6, 0.6, 0.5];
const Q_GAIN: [f64; LEADS] = [0.5, 1.0, 0.6, -0.5, 0.4, 0.8, 0.0, 0.2, 0.4, 0.7, 0.9, 1.0];
const R_GAIN: [f64; LEADS] = [0.6, 1.0, 0.5, -0.7, 0.3, 0.75, 0.25, 0.5, 0.8, 1.1, 1.2, 1.0];
const S_GAIN: [f64; LEADS] = [0.3, 0.4, 0.3, -0.2, 0.3, 0.35, 1.6, 1.4, 0.9, 0.5, 0.3, 0.2];
const T_GAIN: [f64; LEADS] = [0.6, 1.0, 0.4, -0.7, 0.3, 0.7, -0.2, 0.6, 0.9, 1.0, 0.9, 0.8];

#[derive(Debug, Clone, Copy)]
struct Wave {
    offset: f64,
    sigma: f64,
    amp: f64,
}

#[derive(Debug, Clone, Copy)]
enum BeatKind {
    Normal,
    Atrial,
    Ventricular,
}

/// Lead II wave set for one beat whose R peak sits at offset 0.
fn beat_waves(kind: BeatKind, rr: f64, p_wave: bool) -> [Option<Wave>; 5] {
    let qt = 0.28 * rr.sqrt();
    let pr = 0.18 * rr.sqrt().min(1.0);
    let w = |offset, sigma, amp| Some(Wave { offset, sigma, amp });
    match kind {
        BeatKind::Normal => [
            if p_wave { w(-pr, 0.025, 0.15) } else { None },
            w(-0.035, 0.010, -0.12),
            w(0.0, 0.012, 1.2),
            w(0.035, 0.010, -0.25),
            w(qt, 0.05, 0.35),
        ],
        BeatKind::Atrial => [
            w(-0.75 * pr, 0.02, -0.1),
            w(-0.035, 0.010, -0.12),
            w(0.0, 0.012, 1.15),
            w(0.035, 0.010, -0.25),
            w(qt, 0.05, 0.3),
        ],
        BeatKind::Ventricular => [
            None,
            w(-0.07, 0.025, -0.2),
            w(0.0, 0.032, 1.9),
            w(0.08, 0.03, -0.5),
            w(qt + 0.06, 0.07, -0.5),
        ],
    }
}

/// Generates a recording of a supported class.
pub fn synth_generate(
    class: DiagnosisCode,
    seed: u64,
    fs: f64,
    seconds: f64,
) -> Result<SyntheticRecording> {
    let profile = RhythmProfile::for_class(class)?;
    synth_with_profile(class, &profile, seed, fs, seconds)
}

/// Generates a recording from an explicit rhythm profile; `class` only sets
/// the label and salts the random stream.
pub fn synth_with_profile(
    class: DiagnosisCode,
    profile: &RhythmProfile,
    seed: u64,
    fs: f64,
    seconds: f64,
) -> Result<SyntheticRecording> {
    if !(fs > 0.0 && seconds > 0.0 && profile.heart_rate > 0.0) {
        return Err(Error::Argument(
            "fs, seconds and heart_rate must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class.index() as u64 + 1) << 56));
    let n = (seconds * fs).round() as usize;
    let hr = profile.heart_rate * (1.0 + rng.random_range(-1.0..=1.0) * profile.rate_spread);
    let base_rr = 60.0 / hr;

    // beat schedule: (R time, kind, local RR)
    let mut beats = Vec::new();
    let mut t = -base_rr * rng.random_range(0.2..0.9);
    let mut until_ectopic = profile
        .ectopy
        .map(|e| rng.random_range(e.every.0..=e.every.1))
        .unwrap_or(usize::MAX);
    let mut pending_pause = 1.0;
    while t < seconds + 1.0 {
        let jitter = 1.0 + rng.random_range(-1.0..=1.0) * profile.rr_jitter;
        let mut rr = base_rr * jitter * pending_pause;
        pending_pause = 1.0;
        let mut kind = BeatKind::Normal;
        if until_ectopic == 0 {
            let e = profile.ectopy.expect("ectopic countdown without ectopy");
            rr = base_rr * e.prematurity;
            kind = match e.kind {
                EctopicKind::Atrial => BeatKind::Atrial,
                EctopicKind::Ventricular => {
                    pending_pause = 2.0 - e.prematurity;
                    BeatKind::Ventricular
                }
            };
            until_ectopic = rng.random_range(e.every.0..=e.every.1);
        } else if until_ectopic != usize::MAX {
            until_ectopic -= 1;
        }
        t += rr;
        beats.push((t, kind, rr));
    }

    let amp_scale = rng.random_range(0.85..1.15);
    let gains: Vec<[f64; 5]> = (0..LEADS)
        .map(|l| {
            let mut g = [P_GAIN[l], Q_GAIN[l], R_GAIN[l], S_GAIN[l], T_GAIN[l]];
            for v in &mut g {
                *v *= amp_scale * rng.random_range(0.9..1.1);
            }
            g
        })
        .collect();

    let mut channels = vec![vec![0.0; n]; LEADS];
    for &(t_r, kind, rr) in &beats {
        for (w_idx, wave) in beat_waves(kind, rr, profile.p_wave).iter().enumerate() {
            let Some(wave) = wave else { continue };
            let centre = t_r + wave.offset;
            let lo = (((centre - 5.0 * wave.sigma) * fs).floor().max(0.0)) as usize;
            let hi = (((centre + 5.0 * wave.sigma) * fs).ceil().max(0.0) as usize).min(n);
            for j in lo..hi {
                let dt = j as f64 / fs - centre;
                let v = wave.amp * (-0.5 * dt * dt / (wave.sigma * wave.sigma)).exp();
                for (lead, ch) in channels.iter_mut().enumerate() {
                    ch[j] += gains[lead][w_idx] * v;
                }
            }
        }
    }

    let noise = Normal::new(0.0, 0.015).expect("valid sigma");
    let two_pi = 2.0 * std::f64::consts::PI;
    let fib: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(5.0..7.0), rng.random_range(0.0..two_pi)))
        .collect();
    for (lead, ch) in channels.iter_mut().enumerate() {
        let phase = rng.random_range(0.0..two_pi);
        let wander_hz = rng.random_range(0.15..0.35);
        for (j, v) in ch.iter_mut().enumerate() {
            let ts = j as f64 / fs;
            *v += 0.05 * (two_pi * wander_hz * ts + phase).sin();
            if profile.fibrillation > 0.0 {
                let f: f64 = fib.iter().map(|&(hz, ph)| (two_pi * hz * ts + ph).sin()).sum();
                *v += profile.fibrillation / 3.0 * P_GAIN[lead].abs().max(0.3) * f;
            }
            *v += noise.sample(&mut rng);
        }
    }

    let r_peaks = beats
        .iter()
        .map(|&(t_r, _, _)| (t_r * fs).round())
        .filter(|&i| i >= 0.0 && (i as usize) < n)
        .map(|i| i as usize)
        .collect();

    let sex = if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
    let age = if rng.random_bool(0.03) {
        None
    } else {
        Some(rng.random_range(25..=85) as f64)
    };
    let recording = EcgRecording::new(
        format!("{}-{seed}", class.abbreviation()),
        channels,
        fs,
        age,
        sex,
        class,
    )?;
    Ok(SyntheticRecording {
        recording,
        r_peaks,
        heart_rate: hr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_rr(s: &SyntheticRecording) -> f64 {
        let fs = s.recording.fs();
        let gaps: Vec<f64> = s.r_peaks.windows(2).map(|w| (w[1] - w[0]) as f64 / fs).collect();
        gaps.iter().sum::<f64>() / gaps.len() as f64
    }

    #[test]
    fn nsr_rr_within_five_percent_of_one_second() {
        let s = synth_generate(DiagnosisCode::NSR, 1, 257.0, 16.0).unwrap();
        let fs = s.recording.fs();
        assert!(s.r_peaks.len() >= 15);
        for w in s.r_peaks.windows(2) {
            let rr = (w[1] - w[0]) as f64 / fs;
            assert!((rr - 1.0).abs() <= 0.05, "rr {rr}");
        }
    }

    #[test]
    fn tachycardia_and_bradycardia_rates() {
        for seed in 0..5 {
            let st = synth_generate(DiagnosisCode::STach, seed, 257.0, 16.0).unwrap();
            assert!(60.0 / mean_rr(&st) > 100.0);
            let sb = synth_generate(DiagnosisCode::SB, seed, 257.0, 16.0).unwrap();
            assert!(60.0 / mean_rr(&sb) < 60.0);
        }
    }

    #[test]
    fn generation_is_bitwise_reproducible() {
        for class in SUPPORTED_CLASSES {
            let a = synth_generate(class, 42, 257.0, 16.0).unwrap();
            let b = synth_generate(class, 42, 257.0, 16.0).unwrap();
            assert_eq!(a.recording, b.recording);
            assert_eq!(a.r_peaks, b.r_peaks);
            let c = synth_generate(class, 43, 257.0, 16.0).unwrap();
            assert_ne!(a.recording.channels(), c.recording.channels());
        }
    }

    #[test]
    fn unsupported_class_is_a_capability_error() {
        let err = synth_generate(DiagnosisCode::LBBB, 1, 257.0, 16.0).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn af_rhythm_is_irregular() {
        let af = synth_generate(DiagnosisCode::AF, 3, 257.0, 16.0).unwrap();
        let nsr = synth_generate(DiagnosisCode::NSR, 3, 257.0, 16.0).unwrap();
        let cv = |s: &SyntheticRecording| {
            let g: Vec<f64> = s.r_peaks.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
            let m = g.iter().sum::<f64>() / g.len() as f64;
            (g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / g.len() as f64).sqrt() / m
        };
        assert!(cv(&af) > 3.0 * cv(&nsr));
    }

    #[test]
    fn shape_is_twelve_by_round_fs_seconds() {
        let s = synth_generate(DiagnosisCode::VEB, 9, 257.0, 16.0).unwrap();
        assert_eq!(s.recording.channels().len(), 12);
        assert_eq!(s.recording.len(), 4112);
    }
}
