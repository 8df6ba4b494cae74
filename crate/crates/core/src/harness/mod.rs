//! Experiment drivers and the command-line front end.

pub mod cli;
mod config;
mod experiments;
mod report;

pub use config::{
    resolve_data_path, DataSource, ExperimentConfig, ExperimentKind, ExperimentParams, GenerateSpec, ModelTemplate,
    PdeChoice, Setting, DATA_DIR_ENV,
};
pub use experiments::{
    ablation, long_term, median, mesh_independence, relative_spread, train_model, zeroshot_length,
    zeroshot_resolution, AblationRow, LongTermRow, MeshRow, ResolutionScore, TrainedModel, Variant,
    ZeroshotLengthRow, ZeroshotResolutionRow,
};
pub use report::{DatasetInfo, Report, Rows};

use crate::error::Result;
use crate::pdegen::{build_dataset, Dataset};
use crate::persistence::{dataset_hash, load_dataset, save_dataset};
use std::path::Path;

/// Loads or generates the experiment's dataset. Generated data is saved under
/// `out/data` so the report can cite its hash.
pub fn resolve_dataset(source: &DataSource, out: &Path) -> Result<(Dataset, String)> {
    match source {
        DataSource::Path { path } => {
            let dir = resolve_data_path(path);
            let ds = load_dataset(&dir)?;
            Ok((ds, dataset_hash(&dir)?))
        }
        DataSource::Generate(spec) => {
            let ds = build_dataset(&spec.problem()?, spec.n_train, spec.n_test, spec.seed)?;
            let hash = save_dataset(&out.join("data"), &ds)?;
            Ok((ds, hash))
        }
    }
}

/// Powers of two from `low` up to `high`, inclusive.
fn ladder(low: usize, high: usize) -> Vec<usize> {
    std::iter::successors(Some(low), |r| Some(r * 2)).take_while(|r| *r <= high).collect()
}

/// Runs one experiment on an in-memory dataset.
pub fn run_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Rows> {
    cfg.validate()?;
    let p = &cfg.params;
    let size = ds.size();
    let full_horizon = ds.steps().saturating_sub(cfg.model.m);
    Ok(match cfg.experiment {
        ExperimentKind::MeshIndependence => {
            let train_res = p.train_resolution.unwrap_or(size.min(256));
            let eval = if p.eval_resolutions.is_empty() { ladder(train_res, size) } else { p.eval_resolutions.clone() };
            Rows::Mesh(mesh_independence(ds, &cfg.model, &cfg.train, train_res, &eval)?)
        }
        ExperimentKind::LongTerm => {
            Rows::LongTerm(long_term(ds, &cfg.model, &cfg.train, p.horizon.unwrap_or(full_horizon))?)
        }
        ExperimentKind::ZeroshotResolution => {
            let train_res = p.train_resolution.unwrap_or(size / 2);
            let eval = if p.eval_resolutions.is_empty() { vec![size] } else { p.eval_resolutions.clone() };
            Rows::ZeroshotResolution(zeroshot_resolution(ds, &cfg.model, &cfg.train, train_res, &eval)?)
        }
        ExperimentKind::ZeroshotLength => {
            Rows::ZeroshotLength(zeroshot_length(ds, &cfg.model, &cfg.train, p.horizon.unwrap_or(full_horizon))?)
        }
        ExperimentKind::Ablation => Rows::Ablation(ablation(ds, &cfg.model, &cfg.train, &p.seeds)?),
    })
}

/// Resolves data, runs the experiment and writes its report into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let (ds, sha256) = resolve_dataset(&cfg.data, &cfg.out)?;
    let rows = run_on(cfg, &ds)?;
    let report = Report {
        experiment: cfg.experiment.id().into(),
        config: cfg.clone(),
        dataset: DatasetInfo {
            sha256,
            resolution: ds.size(),
            steps: ds.steps(),
            n_train: ds.train.len(),
            n_test: ds.test.len(),
        },
        rows,
    };
    report.write(&cfg.out)?;
    Ok(report)
}
