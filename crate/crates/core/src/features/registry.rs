//! Canonical feature names.
//!
//! Spectral features are named `l<lead>_c_c<coeff>_<op>` where `lead` is
//! 0..=11, `coeff` is 1..=5 and `op` is one of the eleven statistics; the
//! statistics of the undecomposed signal use `l<lead>_c_sig_<op>`.
//! Coefficient `cj` is the level-j detail array for j = 1..=4 and `c5` is the
//! level-4 approximation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::LEADS;

/// Number of coefficient arrays produced by the 4-level decomposition.
pub const COEFF_ARRAYS: usize = 5;

/// Names of the leading morphological/demographic block, in vector order.
pub const MORPH_NAMES: [&str; 14] = [
    "age",
    "sex",
    "hr_mean",
    "rr_mean",
    "rr_median",
    "rr_std",
    "rr_min",
    "rr_max",
    "ramp_mean",
    "ramp_median",
    "ramp_std",
    "ramp_min",
    "ramp_max",
    "n_beats",
];

pub const AGE_INDEX: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Demographic,
    Morphological,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpectralOp {
    N5,
    N25,
    N50,
    N75,
    N95,
    Mean,
    Std,
    Var,
    Skew,
    Kurt,
    Entropy,
}

impl SpectralOp {
    /// In the order [`spectral_stats`](super::spectral_stats) returns them.
    pub const ALL: [SpectralOp; 11] = [
        SpectralOp::N5,
        SpectralOp::N25,
        SpectralOp::N50,
        SpectralOp::N75,
        SpectralOp::N95,
        SpectralOp::Mean,
        SpectralOp::Std,
        SpectralOp::Var,
        SpectralOp::Skew,
        SpectralOp::Kurt,
        SpectralOp::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpectralOp::N5 => "n5",
            SpectralOp::N25 => "n25",
            SpectralOp::N50 => "n50",
            SpectralOp::N75 => "n75",
            SpectralOp::N95 => "n95",
            SpectralOp::Mean => "mean",
            SpectralOp::Std => "std",
            SpectralOp::Var => "var",
            SpectralOp::Skew => "skew",
            SpectralOp::Kurt => "kurt",
            SpectralOp::Entropy => "entropy",
        }
    }

    pub fn position(self) -> usize {
        self as usize
    }
}

/// Which array a spectral statistic is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoeffSlot {
    /// `c1`..`c5`.
    Coeff(u8),
    /// The undecomposed channel.
    Signal,
}

impl CoeffSlot {
    /// Position in the `[cA4, cD4, cD3, cD2, cD1]` output of [`dwt`](super::dwt).
    pub fn dwt_position(self) -> Option<usize> {
        match self {
            CoeffSlot::Coeff(j) => Some(COEFF_ARRAYS - j as usize),
            CoeffSlot::Signal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectralName {
    pub lead: usize,
    pub coeff: CoeffSlot,
    pub op: SpectralOp,
}

impl fmt::Display for SpectralName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.coeff {
            CoeffSlot::Coeff(j) => write!(f, "l{}_c_c{}_{}", self.lead, j, self.op.name()),
            CoeffSlot::Signal => write!(f, "l{}_c_sig_{}", self.lead, self.op.name()),
        }
    }
}

impl FromStr for SpectralName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Schema(format!("not a spectral feature name: `{s}`"));
        let rest = s.strip_prefix('l').ok_or_else(bad)?;
        let (lead, rest) = rest.split_once("_c_").ok_or_else(bad)?;
        if lead.is_empty() || (lead.len() > 1 && lead.starts_with('0')) {
            return Err(bad());
        }
        let lead: usize = lead.parse().map_err(|_| bad())?;
        if lead >= LEADS {
            return Err(bad());
        }
        let (slot, op) = rest.split_once('_').ok_or_else(bad)?;
        let coeff = if slot == "sig" {
            CoeffSlot::Signal
        } else {
            let j = slot.strip_prefix('c').ok_or_else(bad)?;
            match j {
                "1" | "2" | "3" | "4" | "5" => CoeffSlot::Coeff(j.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        };
        let op = SpectralOp::ALL
            .iter()
            .copied()
            .find(|o| o.name() == op)
            .ok_or_else(bad)?;
        Ok(SpectralName { lead, coeff, op })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub index: usize,
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureEntry {
    pub fn spectral(&self) -> Option<SpectralName> {
        match self.kind {
            FeatureKind::Spectral => self.name.parse().ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryConfig {
    /// Also compute the statistics on the undecomposed channel.
    pub include_signal_stats: bool,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            include_signal_stats: false,
        }
    }
}

/// Ordered, uniquely named feature set. Indices are always contiguous from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    entries: Vec<FeatureEntry>,
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::new(RegistryConfig::default())
    }
}

impl FeatureRegistry {
    /// 14 morphological/demographic features followed by, for each lead, 11
    /// statistics of each of the 5 coefficient arrays (and optionally of the
    /// raw channel).
    pub fn new(cfg: RegistryConfig) -> Self {
        let mut entries = Vec::new();
        for (i, name) in MORPH_NAMES.iter().enumerate() {
            let kind = if i < 2 {
                FeatureKind::Demographic
            } else {
                FeatureKind::Morphological
            };
            entries.push(FeatureEntry {
                index: i,
                name: name.to_string(),
                kind,
            });
        }
        for lead in 0..LEADS {
            let mut slots: Vec<CoeffSlot> = (1..=COEFF_ARRAYS as u8).map(CoeffSlot::Coeff).collect();
            if cfg.include_signal_stats {
                slots.push(CoeffSlot::Signal);
            }
            for coeff in slots {
                for op in SpectralOp::ALL {
                    entries.push(FeatureEntry {
                        index: entries.len(),
                        name: SpectralName { lead, coeff, op }.to_string(),
                        kind: FeatureKind::Spectral,
                    });
                }
            }
        }
        Self { entries }
    }

    /// Builds a registry from names, classifying each one.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut entries = Vec::with_capacity(names.len());
        let mut seen = std::collections::HashSet::new();
        for (index, name) in names.iter().enumerate() {
            let name = name.as_ref();
            if !seen.insert(name.to_string()) {
                return Err(Error::Schema(format!("duplicate feature name `{name}`")));
            }
            let kind = match MORPH_NAMES.iter().position(|m| *m == name) {
                Some(0) | Some(1) => FeatureKind::Demographic,
                Some(_) => FeatureKind::Morphological,
                None => {
                    name.parse::<SpectralName>()?;
                    FeatureKind::Spectral
                }
            };
            entries.push(FeatureEntry {
                index,
                name: name.to_string(),
                kind,
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> Option<&FeatureEntry> {
        self.entries.get(index)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Reduced view containing the features at `indices`, re-indexed from 0
    /// in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let names = indices
            .iter()
            .map(|&i| {
                self.entries
                    .get(i)
                    .map(|e| e.name.clone())
                    .ok_or_else(|| Error::Argument(format!("feature index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_names(&names)
    }
}
