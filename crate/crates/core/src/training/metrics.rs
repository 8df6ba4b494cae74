use super::Checkpoint;
use crate::error::{Error, Result};
use crate::model::{build_hankel_windows, predict};
use crate::pdegen::{Normalizer, Trajectory};
use crate::spectral::RealField;
use serde::{Deserialize, Serialize};

/// Rollout accuracy over every evaluation window of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean squared error over all predicted steps and points, in the
    /// normalized space the model works in.
    pub mse: f64,
    /// Mean over windows and steps of `‖pred − truth‖ / ‖truth‖` in physical
    /// units.
    pub rel_l2: f64,
    /// `rel_l2` per prediction step.
    pub per_step: Vec<f64>,
    /// `mse` per prediction step.
    pub per_step_mse: Vec<f64>,
    pub windows: usize,
}

fn relative(diff_sq: f64, truth_sq: f64) -> f64 {
    if truth_sq > 0.0 {
        (diff_sq / truth_sq).sqrt()
    } else if diff_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Rolls `predictor` out `r_pred` steps from every window (depth `m`, offset
/// `stride`) of `split` and scores it. The predictor sees normalized inputs and
/// returns normalized predictions.
pub fn evaluate_with<P>(
    predictor: P,
    split: &[Trajectory],
    normalizer: &Normalizer,
    m: usize,
    r_pred: usize,
    stride: usize,
) -> Result<Metrics>
where
    P: Fn(&RealField, usize) -> Result<Vec<RealField>>,
{
    evaluate_windows(predictor, split, normalizer, m, r_pred, r_pred, stride)
}

/// As [`evaluate_with`], but windows are laid out as if for a rollout of
/// `window_len >= r_pred` steps, so rollouts of different lengths are scored on
/// the same windows.
fn evaluate_windows<P>(
    predictor: P,
    split: &[Trajectory],
    normalizer: &Normalizer,
    m: usize,
    r_pred: usize,
    window_len: usize,
    stride: usize,
) -> Result<Metrics>
where
    P: Fn(&RealField, usize) -> Result<Vec<RealField>>,
{
    if r_pred == 0 || window_len < r_pred {
        return Err(Error::InvalidParameter("evaluation horizon must be >= 1 and fit the window".into()));
    }
    let mut sq = vec![0.0; r_pred];
    let mut rel = vec![0.0; r_pred];
    let mut points = 0usize;
    let mut windows = 0usize;
    for traj in split {
        let normalized = normalizer.normalize_trajectory(traj);
        let physical = build_hankel_windows(traj, m, window_len, stride)?;
        let scaled = build_hankel_windows(&normalized, m, window_len, stride)?;
        for (raw, win) in physical.iter().zip(&scaled) {
            let pred = predictor(&win.input, r_pred)?;
            if pred.len() != r_pred {
                return Err(Error::ShapeMismatch(format!("predictor returned {} of {r_pred} steps", pred.len())));
            }
            for (j, p) in pred.iter().enumerate() {
                let target = &win.targets[j];
                if p.data().len() != target.data().len() {
                    return Err(Error::ShapeMismatch("prediction and target differ in shape".into()));
                }
                sq[j] += p.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let mut phys = p.clone();
                for c in 0..phys.channels() {
                    normalizer.denormalize_in_place(phys.channel_mut(c), c);
                }
                let truth = &raw.targets[j];
                let diff_sq: f64 = phys.data().iter().zip(truth.data()).map(|(a, b)| (a - b).powi(2)).sum();
                let truth_sq: f64 = truth.data().iter().map(|v| v * v).sum();
                rel[j] += relative(diff_sq, truth_sq);
            }
            points = win.targets[0].data().len();
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(Error::InvalidParameter("evaluation split is empty".into()));
    }
    let per_step_mse: Vec<f64> = sq.iter().map(|v| v / (windows * points) as f64).collect();
    let per_step: Vec<f64> = rel.iter().map(|v| v / windows as f64).collect();
    Ok(Metrics {
        mse: per_step_mse.iter().sum::<f64>() / r_pred as f64,
        rel_l2: per_step.iter().sum::<f64>() / r_pred as f64,
        per_step,
        per_step_mse,
        windows,
    })
}

/// Scores a checkpoint's `r_pred`-step rollouts on `split` (physical units).
pub fn evaluate(ckpt: &Checkpoint, split: &[Trajectory], r_pred: usize) -> Result<Metrics> {
    evaluate_with(
        |input, r| predict(&ckpt.params, input, r),
        split,
        &ckpt.normalizer,
        ckpt.model().m,
        r_pred,
        ckpt.train.window_stride,
    )
}

/// Scores the first `r_pred` steps on the windows a `window_len`-step rollout
/// would use.
pub fn evaluate_prefix(ckpt: &Checkpoint, split: &[Trajectory], r_pred: usize, window_len: usize) -> Result<Metrics> {
    evaluate_windows(
        |input, r| predict(&ckpt.params, input, r),
        split,
        &ckpt.normalizer,
        ckpt.model().m,
        r_pred,
        window_len,
        ckpt.train.window_stride,
    )
}
