use super::{adam_update, evaluate, loss, loss_cotangents, Checkpoint, LossBreakdown, Metrics, OptimState, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{backward, build_hankel_windows, forward, ModelConfig, ModelParams, WindowSample};
use crate::pdegen::{Dataset, Normalizer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-averaged training loss over the epoch.
    pub train: LossBreakdown,
    pub test: Metrics,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest test MSE.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

fn check_compatible(dataset: &Dataset, mcfg: &ModelConfig) -> Result<()> {
    let first = dataset
        .train
        .first()
        .ok_or_else(|| Error::InvalidParameter("training split is empty".into()))?;
    if first.dim() != mcfg.d || first.channels() != mcfg.c {
        return Err(Error::ShapeMismatch(format!(
            "dataset is {}-D with {} channels, model expects {}-D with {}",
            first.dim(),
            first.channels(),
            mcfg.d,
            mcfg.c
        )));
    }
    if mcfg.spectral_branch && mcfg.f > first.size() / 2 {
        return Err(Error::ModesExceedNyquist { modes: mcfg.f, size: first.size() });
    }
    Ok(())
}

/// Sample-averaged loss and gradient over one batch.
pub(super) fn batch_step(params: &ModelParams, batch: &[&WindowSample], lambda_rec: f64) -> Result<(LossBreakdown, ModelParams)> {
    let mut grads = ModelParams::zeros(&params.config);
    let mut sum = LossBreakdown::default();
    let r = params.config.r_train;
    for win in batch {
        let last = win.last_input();
        let (pred, rec, tape) = forward(params, &win.input, r)?;
        let l = loss(&pred, &win.targets, &rec, &last, lambda_rec)?;
        let cot = loss_cotangents(&pred, &win.targets, &rec, &last, lambda_rec)?;
        grads.add_scaled(&backward(params, &tape, &cot)?, 1.0);
        sum.pred_loss += l.pred_loss;
        sum.recon_loss += l.recon_loss;
        sum.total += l.total;
    }
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    sum.pred_loss *= scale;
    sum.recon_loss *= scale;
    sum.total *= scale;
    Ok((sum, grads))
}

/// Trains from a seeded initialization on windows of the normalized training
/// split, scoring the test split after every epoch.
pub fn train(dataset: &Dataset, mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<TrainOutcome> {
    mcfg.validate()?;
    tcfg.validate()?;
    check_compatible(dataset, mcfg)?;
    let normalizer = if tcfg.normalize {
        dataset.normalizer.clone()
    } else {
        Normalizer::identity(mcfg.c)
    };
    let mut windows = Vec::new();
    for traj in &dataset.train {
        let normalized = normalizer.normalize_trajectory(traj);
        windows.extend(build_hankel_windows(&normalized, mcfg.m, mcfg.r_train, tcfg.window_stride)?);
    }
    let mut params = ModelParams::init(mcfg, tcfg.seed)?;
    let mut state = OptimState::new(mcfg);
    let mut best = Checkpoint {
        params: params.clone(),
        train: tcfg.clone(),
        normalizer: normalizer.clone(),
    };
    let mut best_mse = f64::INFINITY;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 0..tcfg.epochs {
        let mut rng = ChaCha20Rng::seed_from_u64(tcfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let step_cfg = TrainConfig {
            lr: tcfg.lr_at(epoch),
            ..tcfg.clone()
        };
        let mut epoch_loss = LossBreakdown::default();
        for (b, chunk) in order.chunks(tcfg.batch_size).enumerate() {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| &windows[i]).collect();
            let (l, grads) = batch_step(&params, &batch, tcfg.lambda_rec)?;
            if !l.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let w = batch.len() as f64;
            epoch_loss.pred_loss += w * l.pred_loss;
            epoch_loss.recon_loss += w * l.recon_loss;
            epoch_loss.total += w * l.total;
            adam_update(&mut params, &grads, &mut state, &step_cfg)?;
        }
        let n = windows.len() as f64;
        epoch_loss.pred_loss /= n;
        epoch_loss.recon_loss /= n;
        epoch_loss.total /= n;
        let current = Checkpoint {
            params: params.clone(),
            train: tcfg.clone(),
            normalizer: normalizer.clone(),
        };
        let test = evaluate(&current, &dataset.test, mcfg.r_train)?;
        if test.mse < best_mse {
            best_mse = test.mse;
            best_epoch = Some(epoch);
            best = current;
        }
        history.push(EpochRecord {
            epoch,
            lr: step_cfg.lr,
            train: epoch_loss,
            test,
        });
    }
    Ok(TrainOutcome {
        checkpoint: best,
        history,
        best_epoch,
    })
}
