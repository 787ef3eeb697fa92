//! Row-major feature matrix with record ids and class labels.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::signal::NUM_CLASSES;

/// Rows are samples, columns are features. Labels are class indices 0..27.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    x: Array2<f64>,
    labels: Vec<usize>,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>, x: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if ids.len() != x.nrows() || labels.len() != x.nrows() {
            return Err(Error::Schema(format!(
                "{} ids, {} labels, {} rows",
                ids.len(),
                labels.len(),
                x.nrows()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::Label(format!("class index {l} out of range")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite feature value".into()));
        }
        Ok(Self { ids, x, labels })
    }

    /// Stacks extracted vectors; all must have `n_features` values.
    pub fn from_vectors(vectors: &[FeatureVector], n_features: usize) -> Result<Self> {
        let mut x = Array2::zeros((vectors.len(), n_features));
        for (i, v) in vectors.iter().enumerate() {
            if v.values.len() != n_features {
                return Err(Error::Schema(format!(
                    "vector `{}` has {} values, expected {n_features}",
                    v.record_id,
                    v.values.len()
                )));
            }
            x.row_mut(i).assign(&ArrayView1::from(&v.values[..]));
        }
        Self::new(
            vectors.iter().map(|v| v.record_id.clone()).collect(),
            x,
            vectors.iter().map(|v| v.label.index()).collect(),
        )
    }

    pub fn empty(n_features: usize) -> Self {
        Self {
            ids: Vec::new(),
            x: Array2::zeros((0, n_features)),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Rows in the given order (repeats allowed).
    pub fn take_rows(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            x: self.x.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Keeps the given feature columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::Argument(format!("column {c} out of range")));
        }
        Ok(Self {
            ids: self.ids.clone(),
            x: self.x.select(Axis(1), cols),
            labels: self.labels.clone(),
        })
    }

    pub fn concat(parts: &[&FeatureTable]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::Argument("nothing to concatenate".into()));
        };
        if parts.iter().any(|p| p.n_features() != first.n_features()) {
            return Err(Error::Schema("feature counts differ".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.x.view()).collect();
        let x = ndarray::concatenate(Axis(0), &views).expect("same column count");
        Ok(Self {
            ids: parts.iter().flat_map(|p| p.ids.iter().cloned()).collect(),
            x,
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
        })
    }

    /// Appends one row.
    pub fn push(&mut self, id: String, row: ArrayView1<'_, f64>, label: usize) -> Result<()> {
        if label >= NUM_CLASSES {
            return Err(Error::Label(format!("class index {label} out of range")));
        }
        self.x
            .push_row(row)
            .map_err(|e| Error::Schema(e.to_string()))?;
        self.ids.push(id);
        self.labels.push(label);
        Ok(())
    }

    pub fn map_x(&self, f: impl FnOnce(&Array2<f64>) -> Array2<f64>) -> Self {
        let x = f(&self.x);
        assert_eq!(x.dim(), self.x.dim());
        Self {
            ids: self.ids.clone(),
            x,
            labels: self.labels.clone(),
        }
    }
}
