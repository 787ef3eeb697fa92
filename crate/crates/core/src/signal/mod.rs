//! Recording data model, ingestion, resampling and the synthetic generator.

mod io;
mod resample;
mod synth;

pub use io::{load_dataset, write_dataset, write_recording, LoadReport, RecordError};
pub use resample::{fix_length, resample};
pub use synth::{
    synth_generate, synth_with_profile, EctopicKind, Ectopy, RhythmProfile, SyntheticRecording,
    SUPPORTED_CLASSES,
};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ECG leads in every recording.
pub const LEADS: usize = 12;

/// Lead names in storage order.
pub const LEAD_NAMES: [&str; LEADS] = [
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
];

/// Index of lead II, the reference lead for rhythm analysis.
pub const LEAD_II: usize = 1;

/// The 27 diagnosis classes. Discriminants are the class indices used by the
/// models and the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosisCode {
    IAVB = 0,
    #[serde(rename = "abQRS")]
    AbQRS,
    AF,
    LAE,
    LAD,
    LBBB,
    LVH,
    LQRSV,
    MI,
    MIs,
    NSSTTA,
    OldMI,
    PR,
    PAC,
    LQT,
    QAb,
    RBBB,
    SA,
    SB,
    NSR,
    STach,
    STD,
    STE,
    STIAb,
    TAb,
    TInv,
    VEB,
}

/// Size of the label space.
pub const NUM_CLASSES: usize = 27;

impl DiagnosisCode {
    pub const ALL: [DiagnosisCode; NUM_CLASSES] = [
        DiagnosisCode::IAVB,
        DiagnosisCode::AbQRS,
        DiagnosisCode::AF,
        DiagnosisCode::LAE,
        DiagnosisCode::LAD,
        DiagnosisCode::LBBB,
        DiagnosisCode::LVH,
        DiagnosisCode::LQRSV,
        DiagnosisCode::MI,
        DiagnosisCode::MIs,
        DiagnosisCode::NSSTTA,
        DiagnosisCode::OldMI,
        DiagnosisCode::PR,
        DiagnosisCode::PAC,
        DiagnosisCode::LQT,
        DiagnosisCode::QAb,
        DiagnosisCode::RBBB,
        DiagnosisCode::SA,
        DiagnosisCode::SB,
        DiagnosisCode::NSR,
        DiagnosisCode::STach,
        DiagnosisCode::STD,
        DiagnosisCode::STE,
        DiagnosisCode::STIAb,
        DiagnosisCode::TAb,
        DiagnosisCode::TInv,
        DiagnosisCode::VEB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn abbreviation(self) -> &'static str {
        use DiagnosisCode::*;
        match self {
            IAVB => "IAVB",
            AbQRS => "abQRS",
            AF => "AF",
            LAE => "LAE",
            LAD => "LAD",
            LBBB => "LBBB",
            LVH => "LVH",
            LQRSV => "LQRSV",
            MI => "MI",
            MIs => "MIs",
            NSSTTA => "NSSTTA",
            OldMI => "OldMI",
            PR => "PR",
            PAC => "PAC",
            LQT => "LQT",
            QAb => "QAb",
            RBBB => "RBBB",
            SA => "SA",
            SB => "SB",
            NSR => "NSR",
            STach => "STach",
            STD => "STD",
            STE => "STE",
            STIAb => "STIAb",
            TAb => "TAb",
            TInv => "TInv",
            VEB => "VEB",
        }
    }

    pub fn description(self) -> &'static str {
        use DiagnosisCode::*;
        match self {
            IAVB => "1st degree AV block",
            AbQRS => "Abnormal QRS",
            AF => "Atrial fibrillation",
            LAE => "Left atrial enlargement",
            LAD => "Left axis deviation",
            LBBB => "Left bundle branch block",
            LVH => "Left ventricular hypertrophy",
            LQRSV => "Low QRS voltages",
            MI => "Myocardial infarction",
            MIs => "Myocardial ischemia",
            NSSTTA => "Nonspecific ST T abnormality",
            OldMI => "Old myocardial infarction",
            PR => "Pacing rhythm",
            PAC => "Premature atrial contraction",
            LQT => "Prolonged QT interval",
            QAb => "Q wave abnormal",
            RBBB => "Right bundle branch block",
            SA => "Sinus arrhythmia",
            SB => "Sinus bradycardia",
            NSR => "Sinus rhythm",
            STach => "Sinus tachycardia",
            STD => "ST depression",
            STE => "ST elevation",
            STIAb => "ST interval abnormal",
            TAb => "T wave abnormal",
            TInv => "T wave inversion",
            VEB => "Ventricular ectopics",
        }
    }
}

impl fmt::Display for DiagnosisCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for DiagnosisCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.abbreviation() == s)
            .ok_or_else(|| Error::Label(format!("unknown diagnosis code `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    /// Numeric encoding used as a feature.
    pub fn encode(self) -> f64 {
        match self {
            Sex::Male => 1.0,
            Sex::Female => 0.0,
            Sex::Unknown => 0.5,
        }
    }

    pub fn code(self) -> char {
        match self {
            Sex::Male => 'M',
            Sex::Female => 'F',
            Sex::Unknown => 'U',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "M" => Some(Sex::Male),
            "F" => Some(Sex::Female),
            "U" => Some(Sex::Unknown),
            _ => None,
        }
    }
}

/// One 12-lead recording with a single diagnosis.
///
/// Construction validates every invariant, so a value of this type always has
/// 12 equal-length finite channels and a positive sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecording {
    id: String,
    channels: Vec<Vec<f64>>,
    fs: f64,
    age: Option<f64>,
    sex: Sex,
    label: DiagnosisCode,
}

impl EcgRecording {
    pub fn new(
        id: impl Into<String>,
        channels: Vec<Vec<f64>>,
        fs: f64,
        age: Option<f64>,
        sex: Sex,
        label: DiagnosisCode,
    ) -> Result<Self> {
        let id = id.into();
        if channels.len() != LEADS {
            return Err(Error::Schema(format!(
                "record `{id}` has {} channels, expected {LEADS}",
                channels.len()
            )));
        }
        let d = channels[0].len();
        if d == 0 {
            return Err(Error::Schema(format!("record `{id}` has empty channels")));
        }
        if let Some(c) = channels.iter().position(|c| c.len() != d) {
            return Err(Error::Schema(format!(
                "record `{id}`: channel {c} has {} samples, expected {d}",
                channels[c].len()
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Schema(format!("record `{id}`: invalid fs {fs}")));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("record `{id}` has non-finite samples")));
        }
        if let Some(a) = age {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::Schema(format!("record `{id}`: invalid age {a}")));
            }
        }
        Ok(Self {
            id,
            channels,
            fs,
            age,
            sex,
            label,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, lead: usize) -> &[f64] {
        &self.channels[lead]
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn age(&self) -> Option<f64> {
        self.age
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn label(&self) -> DiagnosisCode {
        self.label
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Rebuilds the recording with new channel data and sampling rate,
    /// keeping id, demographics and label.
    pub(crate) fn with_channels(&self, channels: Vec<Vec<f64>>, fs: f64) -> Self {
        debug_assert_eq!(channels.len(), LEADS);
        Self {
            id: self.id.clone(),
            channels,
            fs,
            age: self.age,
            sex: self.sex,
            label: self.label,
        }
    }
}

/// An ordered collection of recordings with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    recordings: Vec<EcgRecording>,
    provenance: String,
}

impl Dataset {
    pub fn new(recordings: Vec<EcgRecording>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(recordings.len());
        for r in &recordings {
            if !seen.insert(r.id()) {
                return Err(Error::Schema(format!("duplicate record id `{}`", r.id())));
            }
        }
        Ok(Self {
            recordings,
            provenance: provenance.into(),
        })
    }

    pub fn recordings(&self) -> &[EcgRecording] {
        &self.recordings
    }

    pub fn into_recordings(self) -> Vec<EcgRecording> {
        self.recordings
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.recordings.iter().map(|r| r.label().index()).collect()
    }

    /// Per-class record counts over all 27 classes.
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for r in &self.recordings {
            counts[r.label().index()] += 1;
        }
        counts
    }

    /// New dataset made of the recordings at `indices` (in that order).
    pub fn subset(&self, indices: &[usize], provenance: impl Into<String>) -> Result<Self> {
        let recs = indices.iter().map(|&i| self.recordings[i].clone()).collect();
        Self::new(recs, provenance)
    }
}
