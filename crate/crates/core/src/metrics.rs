//! Confusion matrix and support-weighted one-vs-rest metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{DiagnosisCode, NUM_CLASSES};

/// `counts[i][j]`: samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self { counts: vec![vec![0; NUM_CLASSES]; NUM_CLASSES] }
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Row sum: samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Column sum: samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn fp(&self, c: usize) -> u64 {
        self.predicted(c) - self.tp(c)
    }

    pub fn fn_(&self, c: usize) -> u64 {
        self.support(c) - self.tp(c)
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.support(c) - self.fp(c)
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Argument("no samples to evaluate".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(Error::Label(format!("class index {} out of range", t.max(p))));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: DiagnosisCode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the metric's denominator was zero and it was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub samples: u64,
    /// Wall-clock seconds attributed to the run, when known.
    pub seconds: f64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Top-1 accuracy and support-weighted precision, recall and F1. Undefined
/// ratios count as 0 and are flagged; classes with no support get weight 0.
pub fn weighted_metrics(m: &ConfusionMatrix) -> Result<MetricsBundle> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Argument("empty confusion matrix".into()));
    }
    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..NUM_CLASSES {
        let tp = m.tp(c);
        let (precision, precision_undefined) = ratio(tp, m.predicted(c));
        let (recall, recall_undefined) = ratio(tp, m.support(c));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let support = m.support(c);
        let w = support as f64 / total as f64;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            class: DiagnosisCode::ALL[c],
            precision,
            recall,
            f1,
            support,
            precision_undefined,
            recall_undefined,
        });
    }
    Ok(MetricsBundle {
        accuracy: m.trace() as f64 / total as f64,
        precision: wp,
        recall: wr,
        f1: wf,
        per_class,
        samples: total,
        seconds: 0.0,
    })
}

/// Convenience: confusion plus weighted metrics.
pub fn evaluate(y_true: &[usize], y_pred: &[usize]) -> Result<MetricsBundle> {
    weighted_metrics(&confusion(y_true, y_pred)?)
}
