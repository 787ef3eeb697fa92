//! Dense and LSTM classifiers with hand-written backpropagation, Adam
//! training and a finite-difference gradient checker.

mod dnn;
mod gradcheck;
mod lstm;
mod params;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gradcheck::{gradient_check, BlockCheck, GradCheckConfig, GradCheckReport};
pub use params::{Architecture, Block, ModelParams, ShapeTable};
pub use train::{train_local, write_loss_csv, Adam, TrainConfig};

use crate::error::{Error, Result};
use crate::signal::NUM_CLASSES;

/// Hidden-layer sizes tried for the dense model.
pub const DNN_LAYER_GRID: [usize; 4] = [2, 3, 5, 10];
pub const DNN_UNIT_GRID: [usize; 4] = [50, 100, 500, 1000];
pub const DNN_ACTIVATION_GRID: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Selu];
pub const LSTM_UNIT_GRID: [usize; 5] = [1, 5, 10, 20, 27];
pub const LSTM_ACTIVATION_GRID: [Activation; 3] = [Activation::Identity, Activation::Relu, Activation::Tanh];
pub const OUTPUT_GRID: [OutputActivation; 2] = [OutputActivation::Sigmoid, OutputActivation::Softmax];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Selu,
    /// No activation (`None` in the tuning grid).
    #[serde(alias = "none")]
    Identity,
}

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Selu => "selu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "selu" => Ok(Activation::Selu),
            "identity" | "none" => Ok(Activation::Identity),
            _ => Err(Error::Config(format!("unknown activation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Class probabilities, cross-entropy loss.
    Softmax,
    /// Independent per-class scores, summed binary cross-entropy loss.
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DnnConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub activation: Activation,
    pub output: OutputActivation,
}

impl Default for DnnConfig {
    fn default() -> Self {
        Self {
            input_dim: 120,
            hidden_layers: 3,
            hidden_units: 500,
            activation: Activation::Relu,
            output: OutputActivation::Softmax,
        }
    }
}

/// The input vector is cut into consecutive steps of `step_dim` features
/// (the last step zero-padded) and fed to one LSTM layer; its final hidden
/// state goes through a dense output layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub step_dim: usize,
    pub units: usize,
    /// Applied to the candidate state and to the cell state on output.
    pub activation: Activation,
    pub output: OutputActivation,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            input_dim: 120,
            step_dim: 12,
            units: 27,
            activation: Activation::Identity,
            output: OutputActivation::Softmax,
        }
    }
}

impl LstmConfig {
    pub fn steps(&self) -> usize {
        self.input_dim.div_ceil(self.step_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelConfig {
    #[serde(rename = "DNN")]
    Dnn(DnnConfig),
    #[serde(rename = "LSTM")]
    Lstm(LstmConfig),
}

impl ModelConfig {
    pub fn architecture(&self) -> Architecture {
        match self {
            ModelConfig::Dnn(_) => Architecture::Dnn,
            ModelConfig::Lstm(_) => Architecture::Lstm,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ModelConfig::Dnn(c) => c.input_dim,
            ModelConfig::Lstm(c) => c.input_dim,
        }
    }

    pub fn with_input_dim(mut self, dim: usize) -> Self {
        match &mut self {
            ModelConfig::Dnn(c) => c.input_dim = dim,
            ModelConfig::Lstm(c) => c.input_dim = dim,
        }
        self
    }

    fn output(&self) -> OutputActivation {
        match self {
            ModelConfig::Dnn(c) => c.output,
            ModelConfig::Lstm(c) => c.output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Dnn(c) => {
                if c.input_dim == 0 || c.hidden_layers == 0 || c.hidden_units == 0 {
                    return Err(Error::Config(
                        "dense model needs non-zero input, hidden layers and units".into(),
                    ));
                }
            }
            ModelConfig::Lstm(c) => {
                if c.input_dim == 0 || c.step_dim == 0 || c.units == 0 {
                    return Err(Error::Config("LSTM needs non-zero input, step and units".into()));
                }
                if c.units > NUM_CLASSES {
                    return Err(Error::Config(format!(
                        "LSTM units {} exceed the class count {NUM_CLASSES}",
                        c.units
                    )));
                }
                if c.activation == Activation::Selu {
                    return Err(Error::Config("SELU is not offered for the LSTM layer".into()));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<ShapeTable> {
        self.validate()?;
        Ok(match self {
            ModelConfig::Dnn(c) => dnn::shape(c),
            ModelConfig::Lstm(c) => lstm::shape(c),
        })
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Dnn(DnnConfig::default())
    }
}

fn uniform_fill(values: &mut [f64], limit: f64, rng: &mut ChaCha8Rng) {
    for v in values {
        *v = rng.random_range(-limit..=limit);
    }
}

/// He-uniform weights for ReLU layers, Glorot-uniform for tanh/LSTM/output
/// layers, LeCun-uniform for SELU; zero biases except an LSTM forget-gate
/// bias of 1.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let shape = cfg.shape()?;
    let mut p = ModelParams::zeros(shape.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for block in &shape.blocks {
        if block.dims.len() != 2 {
            continue;
        }
        let (fan_in, fan_out) = (block.dims[0] as f64, block.dims[1] as f64);
        let glorot = (6.0 / (fan_in + fan_out)).sqrt();
        let limit = match cfg {
            ModelConfig::Dnn(c) if block.name.starts_with("dense") => match c.activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                Activation::Selu => (3.0 / fan_in).sqrt(),
                _ => glorot,
            },
            ModelConfig::Lstm(_) if block.name.starts_with("lstm") => {
                // fan_out of a gate matrix is one gate's width
                (6.0 / (fan_in + fan_out / 4.0)).sqrt()
            }
            _ => glorot,
        };
        uniform_fill(&mut p.values_mut()[block.range()], limit, &mut rng);
    }
    if let ModelConfig::Lstm(c) = cfg {
        let h = c.units;
        p.vector_mut("lstm/b").slice_mut(ndarray::s![h..2 * h]).fill(1.0);
    }
    Ok(p)
}

fn check_input(params: &ModelParams, cfg: &ModelConfig, x: &ArrayView2<'_, f64>) -> Result<()> {
    let shape = cfg.shape()?;
    if params.shape() != &shape {
        return Err(Error::Schema("parameters do not match the model configuration".into()));
    }
    if x.ncols() != cfg.input_dim() {
        return Err(Error::Schema(format!(
            "input has {} columns, model expects {}",
            x.ncols(),
            cfg.input_dim()
        )));
    }
    Ok(())
}

/// Output-layer probabilities (rows of a softmax sum to 1).
pub fn forward(params: &ModelParams, cfg: &ModelConfig, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_input(params, cfg, &x)?;
    let logits = match cfg {
        ModelConfig::Dnn(c) => dnn::logits(params, c, x),
        ModelConfig::Lstm(c) => lstm::logits(params, c, x),
    };
    Ok(output_probabilities(logits, cfg.output()))
}

fn output_probabilities(mut z: Array2<f64>, out: OutputActivation) -> Array2<f64> {
    match out {
        OutputActivation::Softmax => {
            for mut row in z.rows_mut() {
                let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                row.mapv_inplace(|v| (v - m).exp());
                let s = row.sum();
                row /= s;
            }
        }
        OutputActivation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
    }
    z
}

/// Mean loss over the batch and the gradient of the output logits.
fn loss_and_logit_grad(z: &Array2<f64>, y: &[usize], out: OutputActivation) -> (f64, Array2<f64>) {
    let b = z.nrows() as f64;
    let mut loss = 0.0;
    let mut dz = z.clone();
    match out {
        OutputActivation::Softmax => {
            for (mut row, &label) in dz.rows_mut().into_iter().zip(y) {
                let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
                loss += lse - row[label];
                row.mapv_inplace(|v| (v - lse).exp() / b);
                row[label] -= 1.0 / b;
            }
        }
        OutputActivation::Sigmoid => {
            for (mut row, &label) in dz.rows_mut().into_iter().zip(y) {
                for (c, v) in row.iter_mut().enumerate() {
                    let t = f64::from(u8::from(c == label));
                    let softplus = if *v > 0.0 { *v + (-*v).exp().ln_1p() } else { v.exp().ln_1p() };
                    loss += softplus - t * *v;
                    *v = (1.0 / (1.0 + (-*v).exp()) - t) / b;
                }
            }
        }
    }
    (loss / b, dz)
}

/// Mean loss over the batch and its gradient, laid out like `params`.
pub fn loss_and_grad(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: ArrayView2<'_, f64>,
    y: &[usize],
) -> Result<(f64, ModelParams)> {
    check_input(params, cfg, &x)?;
    if y.len() != x.nrows() {
        return Err(Error::Schema(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::Label(format!("class index {l} out of range")));
    }
    if y.is_empty() {
        return Err(Error::Capability("empty batch".into()));
    }
    Ok(match cfg {
        ModelConfig::Dnn(c) => dnn::loss_and_grad(params, c, x, y),
        ModelConfig::Lstm(c) => lstm::loss_and_grad(params, c, x, y),
    })
}

/// Mean loss only.
pub fn loss(params: &ModelParams, cfg: &ModelConfig, x: ArrayView2<'_, f64>, y: &[usize]) -> Result<f64> {
    check_input(params, cfg, &x)?;
    let z = match cfg {
        ModelConfig::Dnn(c) => dnn::logits(params, c, x),
        ModelConfig::Lstm(c) => lstm::logits(params, c, x),
    };
    Ok(loss_and_logit_grad(&z, y, cfg.output()).0)
}

fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Most probable class per row, ties to the lowest index.
pub fn predict(params: &ModelParams, cfg: &ModelConfig, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(&forward(params, cfg, x)?))
}
