use super::config::{ModelTemplate, Setting};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pdegen::Dataset;
use crate::training::{evaluate, evaluate_prefix, train, Checkpoint, EpochRecord, Metrics, TrainConfig};
use serde::{Deserialize, Serialize};

/// `(max − min) / mean`; zero for fewer than two values.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A trained model with its training history and test score at `r_train`.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub test: Metrics,
}

pub fn train_model(ds: &Dataset, mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<TrainedModel> {
    let out = train(ds, mcfg, tcfg)?;
    let test = evaluate(&out.checkpoint, &ds.test, mcfg.r_train)?;
    Ok(TrainedModel {
        checkpoint: out.checkpoint,
        history: out.history,
        test,
    })
}

fn model_config(ds: &Dataset, template: &ModelTemplate, setting: Setting) -> Result<ModelConfig> {
    let first = ds
        .train
        .first()
        .ok_or_else(|| Error::InvalidParameter("dataset has no training trajectories".into()))?;
    Ok(template.config(setting, first.dim(), first.channels()))
}

fn factor(from: usize, to: usize) -> Result<usize> {
    if to == 0 || from % to != 0 || !(from / to).is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "resolution {to} is not a power-of-two coarsening of {from}"
        )));
    }
    Ok(from / to)
}

/// Per-resolution scores of one trained setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionScore {
    pub resolution: usize,
    pub mse: f64,
    pub rel_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRow {
    pub setting: Setting,
    pub parameters: usize,
    pub train_resolution: usize,
    pub scores: Vec<ResolutionScore>,
    /// Relative spread of `mse` across the evaluated resolutions.
    pub spread: f64,
}

fn score_resolutions(ckpt: &Checkpoint, fine: &Dataset, resolutions: &[usize], r: usize) -> Result<Vec<ResolutionScore>> {
    resolutions
        .iter()
        .map(|&res| {
            let ds = fine.downsample(factor(fine.size(), res)?)?;
            let m = evaluate(ckpt, &ds.test, r)?;
            Ok(ResolutionScore {
                resolution: res,
                mse: m.mse,
                rel_l2: m.rel_l2,
            })
        })
        .collect()
}

/// Trains each setting at `train_res` on strided copies of `fine` and
/// evaluates it unchanged at every resolution in `eval_res`.
pub fn mesh_independence(
    fine: &Dataset,
    template: &ModelTemplate,
    tcfg: &TrainConfig,
    train_res: usize,
    eval_res: &[usize],
) -> Result<Vec<MeshRow>> {
    let coarse = fine.downsample(factor(fine.size(), train_res)?)?;
    template
        .settings
        .iter()
        .map(|&setting| {
            let mcfg = model_config(&coarse, template, setting)?;
            let trained = train_model(&coarse, &mcfg, tcfg)?;
            let scores = score_resolutions(&trained.checkpoint, fine, eval_res, mcfg.r_train)?;
            let mses: Vec<f64> = scores.iter().map(|s| s.mse).collect();
            Ok(MeshRow {
                setting,
                parameters: mcfg.count_parameters(),
                train_resolution: train_res,
                spread: relative_spread(&mses),
                scores,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTermRow {
    pub setting: Setting,
    pub parameters: usize,
    pub horizon: usize,
    pub metrics: Metrics,
}

/// Trains each setting and scores `horizon`-step rollouts.
pub fn long_term(ds: &Dataset, template: &ModelTemplate, tcfg: &TrainConfig, horizon: usize) -> Result<Vec<LongTermRow>> {
    template
        .settings
        .iter()
        .map(|&setting| {
            let mcfg = model_config(ds, template, setting)?;
            let trained = train_model(ds, &mcfg, tcfg)?;
            Ok(LongTermRow {
                setting,
                parameters: mcfg.count_parameters(),
                horizon,
                metrics: evaluate(&trained.checkpoint, &ds.test, horizon)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroshotResolutionRow {
    pub setting: Setting,
    pub parameters: usize,
    pub train_resolution: usize,
    pub scores: Vec<ResolutionScore>,
    /// MSE at the finest evaluated resolution over MSE at the training one.
    pub fine_to_coarse: f64,
}

/// Trains at a coarse resolution and evaluates at finer ones without
/// retraining.
pub fn zeroshot_resolution(
    fine: &Dataset,
    template: &ModelTemplate,
    tcfg: &TrainConfig,
    train_res: usize,
    eval_res: &[usize],
) -> Result<Vec<ZeroshotResolutionRow>> {
    let coarse = fine.downsample(factor(fine.size(), train_res)?)?;
    let mut resolutions = vec![train_res];
    resolutions.extend(eval_res.iter().filter(|&&r| r != train_res));
    template
        .settings
        .iter()
        .map(|&setting| {
            let mcfg = model_config(&coarse, template, setting)?;
            let trained = train_model(&coarse, &mcfg, tcfg)?;
            let scores = score_resolutions(&trained.checkpoint, fine, &resolutions, mcfg.r_train)?;
            let finest = scores.iter().max_by_key(|s| s.resolution).expect("non-empty");
            Ok(ZeroshotResolutionRow {
                setting,
                parameters: mcfg.count_parameters(),
                train_resolution: train_res,
                fine_to_coarse: finest.mse / scores[0].mse,
                scores,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroshotLengthRow {
    pub setting: Setting,
    pub parameters: usize,
    pub r_train: usize,
    pub horizon: usize,
    /// Rollout of `r_train` steps on the extended evaluation's windows.
    pub supervised: Metrics,
    pub extended: Metrics,
    /// Steps `1..=r_train` agree bitwise between both evaluations.
    pub prefix_consistent: bool,
    /// Mean per-step MSE over steps `1..=r_train`.
    pub supervised_range_mse: f64,
    /// Mean per-step MSE over steps `r_train+1..=horizon`.
    pub extended_range_mse: f64,
}

/// Trains with horizon `r_train` and extends the rollout to `horizon` steps.
pub fn zeroshot_length(
    ds: &Dataset,
    template: &ModelTemplate,
    tcfg: &TrainConfig,
    horizon: usize,
) -> Result<Vec<ZeroshotLengthRow>> {
    template
        .settings
        .iter()
        .map(|&setting| {
            if horizon <= setting.r {
                return Err(Error::InvalidParameter(format!(
                    "extended horizon {horizon} must exceed r_train {}",
                    setting.r
                )));
            }
            let mcfg = model_config(ds, template, setting)?;
            let trained = train_model(ds, &mcfg, tcfg)?;
            let ckpt = &trained.checkpoint;
            let supervised = evaluate_prefix(ckpt, &ds.test, setting.r, horizon)?;
            let extended = evaluate(ckpt, &ds.test, horizon)?;
            let r = setting.r;
            let prefix_consistent = supervised.per_step_mse[..] == extended.per_step_mse[..r]
                && supervised.per_step[..] == extended.per_step[..r];
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok(ZeroshotLengthRow {
                setting,
                parameters: mcfg.count_parameters(),
                r_train: r,
                horizon,
                supervised_range_mse: mean(&extended.per_step_mse[..r]),
                extended_range_mse: mean(&extended.per_step_mse[r..]),
                prefix_consistent,
                supervised,
                extended,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoReconstruction,
    NoConv,
    NoKoopman,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoReconstruction, Variant::NoConv, Variant::NoKoopman];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoReconstruction => "no_reconstruction",
            Variant::NoConv => "no_conv",
            Variant::NoKoopman => "no_koopman",
        }
    }

    /// Applies the ablation to a full configuration.
    pub fn apply(self, mcfg: &ModelConfig, tcfg: &TrainConfig) -> (ModelConfig, TrainConfig) {
        let (mut m, mut t) = (mcfg.clone(), tcfg.clone());
        match self {
            Variant::Full => {}
            Variant::NoReconstruction => t.lambda_rec = 0.0,
            Variant::NoConv => m.conv_branch = false,
            Variant::NoKoopman => m.spectral_branch = false,
        }
        (m, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub model: ModelConfig,
    pub lambda_rec: f64,
    pub parameters: usize,
    pub seeds: Vec<u64>,
    /// Test MSE per seed, in `seeds` order.
    pub mse: Vec<f64>,
    pub median_mse: f64,
}

/// Trains every variant of the first setting under each seed with the same
/// data and budget.
pub fn ablation(ds: &Dataset, template: &ModelTemplate, tcfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("ablation needs at least one seed".into()));
    }
    let full = model_config(ds, template, template.settings[0])?;
    Variant::ALL
        .iter()
        .map(|&variant| {
            let (mcfg, base) = variant.apply(&full, tcfg);
            let mse = seeds
                .iter()
                .map(|&seed| {
                    let t = TrainConfig { seed, ..base.clone() };
                    Ok(train_model(ds, &mcfg, &t)?.test.mse)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AblationRow {
                variant,
                lambda_rec: base.lambda_rec,
                parameters: mcfg.count_parameters(),
                model: mcfg,
                seeds: seeds.to_vec(),
                median_mse: median(&mse),
                mse,
            })
        })
        .collect()
}
