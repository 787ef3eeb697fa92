use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss, loss_and_grad, ModelConfig, ModelParams};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates checked per parameter block; `None` checks all.
    pub per_block: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, per_block: Some(64), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    /// max |g - fd| / (|g| + 1e-8) over checked coordinates
    pub max_component_error: f64,
    /// max |g - fd| / (max |g| + 1e-8) over checked coordinates
    pub block_error: f64,
    pub max_abs_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub loss: f64,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn max_component_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_component_error).fold(0.0, f64::max)
    }

    pub fn max_block_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.block_error).fold(0.0, f64::max)
    }
}

/// Compares the analytic gradient with central differences on a sample of
/// coordinates from every parameter block.
pub fn gradient_check(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    gc: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (l0, grad) = loss_and_grad(params, cfg, x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed);
    let mut probe = params.clone();
    let mut blocks = Vec::new();
    for block in &params.shape().blocks {
        let n = block.len();
        let coords: Vec<usize> = match gc.per_block {
            Some(k) if k < n => {
                let mut c = sample(&mut rng, n, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        let mut worst = 0.0f64;
        let mut worst_abs = 0.0f64;
        let mut max_g = 0.0f64;
        for &i in &coords {
            let k = block.offset + i;
            let orig = probe.values()[k];
            probe.values_mut()[k] = orig + gc.step;
            let up = loss(&probe, cfg, x, y)?;
            probe.values_mut()[k] = orig - gc.step;
            let down = loss(&probe, cfg, x, y)?;
            probe.values_mut()[k] = orig;
            let fd = (up - down) / (2.0 * gc.step);
            let g = grad.values()[k];
            let diff = (g - fd).abs();
            worst = worst.max(diff / (g.abs() + 1e-8));
            worst_abs = worst_abs.max(diff);
            max_g = max_g.max(g.abs());
        }
        blocks.push(BlockCheck {
            name: block.name.clone(),
            checked: coords.len(),
            max_component_error: worst,
            block_error: worst_abs / (max_g + 1e-8),
            max_abs_grad: max_g,
        });
    }
    Ok(GradCheckReport { loss: l0, blocks })
}
