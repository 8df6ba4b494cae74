//! Losses, the adaptive-moment optimizer, the training loop and evaluation.

mod gradcheck;
mod trainer;
mod metrics;

pub use gradcheck::{gradient_check, GradCheckReport, GRADIENT_CHECK_LIMIT};
pub use trainer::{train, EpochRecord, TrainOutcome};
pub use metrics::{evaluate, evaluate_prefix, evaluate_with, Metrics};

use crate::error::{Error, Result};
use crate::model::{Cotangents, ModelConfig, ModelParams};
use crate::pdegen::Normalizer;
use crate::spectral::RealField;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub lambda_rec: f64,
    pub seed: u64,
    /// Train and report `mse` on data normalized with the training-split
    /// statistics.
    pub normalize: bool,
    /// Offset between consecutive training and evaluation windows.
    pub window_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            epochs: 100,
            batch_size: 16,
            lr_decay_factor: 0.5,
            lr_decay_every: 25,
            lambda_rec: 0.5,
            seed: 0,
            normalize: true,
            window_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(self.lambda_rec >= 0.0) {
            return bad("lambda_rec must be non-negative");
        }
        if self.batch_size == 0 || self.window_stride == 0 || self.lr_decay_every == 0 {
            return bad("batch_size, window_stride and lr_decay_every must be >= 1");
        }
        if !(self.eps_opt > 0.0) || !(self.lr_decay_factor > 0.0) {
            return bad("eps_opt and lr_decay_factor must be positive");
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// Trained parameters with everything needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub train: TrainConfig,
    pub normalizer: Normalizer,
}

impl Checkpoint {
    pub fn model(&self) -> &ModelConfig {
        &self.params.config
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pred_loss: f64,
    pub recon_loss: f64,
    pub total: f64,
}

fn sq_err(a: &RealField, b: &RealField) -> Result<f64> {
    if a.data().len() != b.data().len() || a.size() != b.size() || a.dim() != b.dim() {
        return Err(Error::ShapeMismatch("loss operands differ in shape".into()));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum())
}

/// Mean squared prediction error over every step and point, plus
/// `lambda_rec` times the reconstruction error against the newest input.
pub fn loss(
    predictions: &[RealField],
    targets: &[RealField],
    reconstruction: &RealField,
    last_input: &RealField,
    lambda_rec: f64,
) -> Result<LossBreakdown> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mut pred_loss = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        pred_loss += sq_err(p, t)?;
    }
    let count: usize = targets.iter().map(|t| t.data().len()).sum();
    if count > 0 {
        pred_loss /= count as f64;
    }
    let recon_loss = sq_err(reconstruction, last_input)? / last_input.data().len() as f64;
    Ok(LossBreakdown {
        pred_loss,
        recon_loss,
        total: pred_loss + lambda_rec * recon_loss,
    })
}

/// Gradient of [`loss`]'s total with respect to the forward outputs.
pub fn loss_cotangents(
    predictions: &[RealField],
    targets: &[RealField],
    reconstruction: &RealField,
    last_input: &RealField,
    lambda_rec: f64,
) -> Result<Cotangents> {
    let count: usize = targets.iter().map(|t| t.data().len()).sum();
    let diff = |a: &RealField, b: &RealField, scale: f64| {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| scale * (x - y)).collect();
        RealField::new(a.size(), a.dim(), a.channels(), data)
    };
    let pred_scale = if count > 0 { 2.0 / count as f64 } else { 0.0 };
    Ok(Cotangents {
        predictions: predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| diff(p, t, pred_scale))
            .collect::<Result<_>>()?,
        reconstruction: diff(reconstruction, last_input, 2.0 * lambda_rec / last_input.data().len() as f64)?,
    })
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl OptimState {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
            step: 0,
        }
    }
}

/// One bias-corrected adaptive-moment step at `cfg.lr`. Complex weights are
/// updated as independent real and imaginary parts.
pub fn adam_update(params: &mut ModelParams, grads: &ModelParams, state: &mut OptimState, cfg: &TrainConfig) -> Result<()> {
    if params.config != grads.config || params.config != state.m.config || params.config != state.v.config {
        return Err(Error::ShapeMismatch("optimizer operands built from different model configs".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let g: Vec<&[f64]> = grads.views().into_iter().map(|v| v.data).collect();
    let ps = params.slices_mut();
    let ms = state.m.slices_mut();
    let vs = state.v.slices_mut();
    for (((p, g), m), v) in ps.into_iter().zip(g).zip(ms).zip(vs) {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps_opt);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
