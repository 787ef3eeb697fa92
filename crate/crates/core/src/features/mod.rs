//! Engineered features: rhythm/demographic block plus wavelet statistics.

mod dwt;
mod extract;
mod morph;
mod peaks;
mod registry;
mod stats;

pub use dwt::{db4_dec_hi, dwt, dwt_step, max_level, wavedec, DB4_DEC_LO, DWT_LEVELS};
pub use extract::{
    extract_batch, extract_features, standardize, write_feature_csv, FeatureVector, QualityIssue,
};
pub use morph::{morphological_features, MISSING_AGE};
pub use peaks::{bandpass, detect_r_peaks, RPeakTrain};
pub use registry::{
    CoeffSlot, FeatureEntry, FeatureKind, FeatureRegistry, RegistryConfig, SpectralName,
    SpectralOp, AGE_INDEX, COEFF_ARRAYS, MORPH_NAMES,
};
pub use stats::{energy_entropy, percentile_sorted, spectral_stats};
