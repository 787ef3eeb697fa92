use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::registry::{CoeffSlot, FeatureKind, FeatureRegistry, MORPH_NAMES};
use super::{detect_r_peaks, dwt, morphological_features, spectral_stats, RPeakTrain};
use crate::error::{Error, Result};
use crate::signal::{fix_length, resample, DiagnosisCode, EcgRecording, LEADS, LEAD_II};

/// A sub-computation that failed and was replaced by 0.0 sentinels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualityIssue {
    PeakDetection,
    Decomposition { lead: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub record_id: String,
    pub label: DiagnosisCode,
    pub values: Vec<f64>,
    pub issues: Vec<QualityIssue>,
}

/// Brings a recording to the common sampling rate and length.
pub fn standardize(rec: &EcgRecording, fs: f64, seconds: f64) -> Result<EcgRecording> {
    let rec = if rec.fs() == fs { rec.clone() } else { resample(rec, fs)? };
    fix_length(&rec, seconds)
}

/// Computes the features named by `registry` for one recording.
///
/// Failures of peak detection or of the decomposition on a lead become 0.0
/// values plus a [`QualityIssue`]; the output never contains NaN or Inf.
pub fn extract_features(rec: &EcgRecording, registry: &FeatureRegistry) -> FeatureVector {
    let mut issues = Vec::new();
    let peaks = match detect_r_peaks(rec.channel(LEAD_II), rec.fs()) {
        Ok(p) => p,
        Err(_) => {
            issues.push(QualityIssue::PeakDetection);
            RPeakTrain::empty(rec.fs())
        }
    };
    let morph = morphological_features(rec, &peaks);

    // per lead: stats of the 5 coefficient arrays plus the raw signal
    let mut lead_stats: Vec<Option<[[f64; 11]; 6]>> = vec![None; LEADS];
    let needed: Vec<bool> = (0..LEADS)
        .map(|l| registry.entries().iter().any(|e| e.spectral().is_some_and(|s| s.lead == l)))
        .collect();
    for lead in (0..LEADS).filter(|&l| needed[l]) {
        let ch = rec.channel(lead);
        match dwt(ch) {
            Ok(coeffs) => {
                let mut block = [[0.0; 11]; 6];
                for (k, c) in coeffs.iter().enumerate() {
                    block[k] = spectral_stats(c).unwrap_or([0.0; 11]);
                }
                block[5] = spectral_stats(ch).unwrap_or([0.0; 11]);
                lead_stats[lead] = Some(block);
            }
            Err(_) => issues.push(QualityIssue::Decomposition { lead }),
        }
    }

    let values = registry
        .entries()
        .iter()
        .map(|e| {
            let v = match e.kind {
                FeatureKind::Spectral => {
                    let s = e.spectral().expect("registry validated spectral names");
                    lead_stats[s.lead].map_or(0.0, |block| {
                        let row = match s.coeff {
                            CoeffSlot::Signal => 5,
                            c => c.dwt_position().expect("coefficient slot"),
                        };
                        block[row][s.op.position()]
                    })
                }
                _ => {
                    let i = MORPH_NAMES.iter().position(|m| *m == e.name).expect("morph name");
                    morph[i]
                }
            };
            if v.is_finite() {
                v
            } else {
                0.0
            }
        })
        .collect();

    FeatureVector {
        record_id: rec.id().to_string(),
        label: rec.label(),
        values,
        issues,
    }
}

/// Extracts features for many recordings in parallel; output order follows
/// input order.
pub fn extract_batch(recs: &[EcgRecording], registry: &FeatureRegistry) -> Vec<FeatureVector> {
    recs.par_iter().map(|r| extract_features(r, registry)).collect()
}

/// Writes `id,label,<feature names...>` followed by one row per vector.
pub fn write_feature_csv(
    path: impl AsRef<Path>,
    registry: &FeatureRegistry,
    vectors: &[FeatureVector],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(registry.names().into_iter().map(String::from));
    w.write_record(&header)?;
    for v in vectors {
        if v.values.len() != registry.len() {
            return Err(Error::Schema(format!(
                "vector `{}` has {} values, registry has {}",
                v.record_id,
                v.values.len(),
                registry.len()
            )));
        }
        let mut row = vec![v.record_id.clone(), v.label.to_string()];
        row.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Serde(e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}
