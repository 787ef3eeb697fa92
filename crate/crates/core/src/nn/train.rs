use std::io::Write;
use std::path::Path;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("Adam moments must be in [0, 1) and epsilon positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, len: usize) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Runs `epochs` passes of shuffled mini-batch Adam starting from `params`.
/// The optimizer state starts fresh on every call. Returns the updated
/// parameters and the mean mini-batch loss of each epoch.
pub fn train_local(
    params: &ModelParams,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    data: &FeatureTable,
) -> Result<(ModelParams, Vec<f64>)> {
    tcfg.validate()?;
    if data.is_empty() {
        return Err(Error::Capability("no training rows".into()));
    }
    let mut p = params.clone();
    let mut opt = Adam::new(tcfg, p.len());
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    for _ in 0..tcfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let x = data.x().select(Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| data.labels()[i]).collect();
            let (l, g) = loss_and_grad(&p, cfg, x.view(), &y)?;
            total += l * batch.len() as f64;
            opt.step(p.values_mut(), g.values());
        }
        history.push(total / data.len() as f64);
    }
    if p.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence("training diverged to non-finite weights".into()));
    }
    Ok((p, history))
}

/// `epoch,loss` rows, epochs counted from 1.
pub fn write_loss_csv(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["epoch", "loss"])?;
    for (e, l) in history.iter().enumerate() {
        w.write_record([(e + 1).to_string(), l.to_string()])?;
    }
    w.into_inner()
        .map_err(|e| Error::Serde(e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}
