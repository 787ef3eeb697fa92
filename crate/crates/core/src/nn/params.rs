use std::path::Path;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "DNN")]
    Dnn,
    #[serde(rename = "LSTM")]
    Lstm,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Dnn => "DNN",
            Architecture::Lstm => "LSTM",
        })
    }
}

/// A named slice of the flat parameter vector. Matrices are `[rows, cols]`
/// in row-major order; biases are `[len]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub dims: Vec<usize>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeTable {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub output_dim: usize,
    pub blocks: Vec<Block>,
}

impl ShapeTable {
    pub fn new(architecture: Architecture, input_dim: usize, output_dim: usize) -> Self {
        Self { architecture, input_dim, output_dim, blocks: Vec::new() }
    }

    pub fn push(&mut self, name: &str, dims: &[usize]) {
        let offset = self.len();
        self.blocks.push(Block { name: name.into(), offset, dims: dims.to_vec() });
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Flat `f64` weights plus the table describing how they are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    shape: ShapeTable,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(shape: ShapeTable) -> Self {
        let n = shape.len();
        Self { shape, values: vec![0.0; n] }
    }

    pub fn from_values(shape: ShapeTable, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Schema(format!(
                "{} values for a shape table of {}",
                values.len(),
                shape.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite parameter".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> &ShapeTable {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn architecture(&self) -> Architecture {
        self.shape.architecture
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.shape == other.shape
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape.clone())
    }

    fn find(&self, name: &str) -> &Block {
        self.shape
            .block(name)
            .unwrap_or_else(|| panic!("no parameter block `{name}`"))
    }

    pub fn matrix(&self, name: &str) -> ArrayView2<'_, f64> {
        let b = self.find(name);
        ArrayView2::from_shape((b.dims[0], b.dims[1]), &self.values[b.range()]).expect("block dims")
    }

    pub fn vector(&self, name: &str) -> ArrayView1<'_, f64> {
        let b = self.find(name);
        ArrayView1::from(&self.values[b.range()])
    }

    pub fn matrix_mut(&mut self, name: &str) -> ArrayViewMut2<'_, f64> {
        let b = self.find(name).clone();
        ArrayViewMut2::from_shape((b.dims[0], b.dims[1]), &mut self.values[b.range()]).expect("block dims")
    }

    pub fn vector_mut(&mut self, name: &str) -> ArrayViewMut1<'_, f64> {
        let b = self.find(name).clone();
        ArrayViewMut1::from(&mut self.values[b.range()])
    }

    /// Little-endian `f64` bytes of the flat vector.
    pub fn to_blob(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_blob(shape: ShapeTable, blob: &[u8]) -> Result<Self> {
        if blob.len() % 8 != 0 {
            return Err(Error::Schema("blob length is not a multiple of 8".into()));
        }
        let values = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_values(shape, values)
    }

    /// Hex SHA-256 of the blob.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_blob()))
    }

    /// Writes `<stem>.bin` and `<stem>.json` (the shape table).
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let bin = dir.join(format!("{stem}.bin"));
        std::fs::write(&bin, self.to_blob()).map_err(|e| Error::io(&bin, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&self.shape)?).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let json = dir.join(format!("{stem}.json"));
        let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let shape: ShapeTable = serde_json::from_str(&text)?;
        let bin = dir.join(format!("{stem}.bin"));
        let blob = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        Self::from_blob(shape, &blob)
    }
}
