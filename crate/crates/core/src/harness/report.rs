use super::config::ExperimentConfig;
use super::experiments::{AblationRow, LongTermRow, MeshRow, ZeroshotLengthRow, ZeroshotResolutionRow};
use crate::error::{Error, Result};
use crate::persistence::{write_json, MetricRecord, MetricsLog};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub sha256: String,
    pub resolution: usize,
    pub steps: usize,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Rows {
    Mesh(Vec<MeshRow>),
    LongTerm(Vec<LongTermRow>),
    ZeroshotResolution(Vec<ZeroshotResolutionRow>),
    ZeroshotLength(Vec<ZeroshotLengthRow>),
    Ablation(Vec<AblationRow>),
}

/// Everything an experiment produced, with the configuration and data it
/// ran on.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub rows: Rows,
}

struct Line {
    config: Value,
    step: Option<usize>,
    metric: String,
    value: f64,
}

fn line(config: Value, step: Option<usize>, metric: &str, value: f64) -> Line {
    Line {
        config,
        step,
        metric: metric.into(),
        value,
    }
}

fn curve(out: &mut Vec<Line>, config: &Value, name: &str, values: &[f64]) {
    for (j, v) in values.iter().enumerate() {
        out.push(line(config.clone(), Some(j + 1), name, *v));
    }
}

impl Report {
    fn lines(&self) -> Vec<Line> {
        let mut out = Vec::new();
        match &self.rows {
            Rows::Mesh(rows) => {
                for r in rows {
                    for s in &r.scores {
                        let cfg = json!({"setting": r.setting, "resolution": s.resolution});
                        out.push(line(cfg.clone(), None, "mse", s.mse));
                        out.push(line(cfg, None, "rel_l2", s.rel_l2));
                    }
                    out.push(line(json!({"setting": r.setting}), None, "mse_spread", r.spread));
                }
            }
            Rows::LongTerm(rows) => {
                for r in rows {
                    let cfg = json!({"setting": r.setting, "horizon": r.horizon});
                    out.push(line(cfg.clone(), None, "mse", r.metrics.mse));
                    out.push(line(cfg.clone(), None, "rel_l2", r.metrics.rel_l2));
                    curve(&mut out, &cfg, "step_mse", &r.metrics.per_step_mse);
                    curve(&mut out, &cfg, "step_rel_l2", &r.metrics.per_step);
                }
            }
            Rows::ZeroshotResolution(rows) => {
                for r in rows {
                    for s in &r.scores {
                        let cfg = json!({"setting": r.setting, "resolution": s.resolution, "train_resolution": r.train_resolution});
                        out.push(line(cfg.clone(), None, "mse", s.mse));
                        out.push(line(cfg, None, "rel_l2", s.rel_l2));
                    }
                    out.push(line(json!({"setting": r.setting}), None, "fine_to_coarse", r.fine_to_coarse));
                }
            }
            Rows::ZeroshotLength(rows) => {
                for r in rows {
                    let cfg = json!({"setting": r.setting, "horizon": r.horizon});
                    curve(&mut out, &cfg, "step_mse", &r.extended.per_step_mse);
                    curve(&mut out, &cfg, "step_rel_l2", &r.extended.per_step);
                    out.push(line(cfg.clone(), None, "supervised_range_mse", r.supervised_range_mse));
                    out.push(line(cfg.clone(), None, "extended_range_mse", r.extended_range_mse));
                    out.push(line(cfg, None, "prefix_consistent", f64::from(u8::from(r.prefix_consistent))));
                }
            }
            Rows::Ablation(rows) => {
                for r in rows {
                    for (seed, mse) in r.seeds.iter().zip(&r.mse) {
                        out.push(line(json!({"variant": r.variant, "seed": seed}), None, "mse", *mse));
                    }
                    out.push(line(json!({"variant": r.variant}), None, "median_mse", r.median_mse));
                }
            }
        }
        out
    }

    /// Tab-separated table, one row per metric line.
    pub fn table(&self) -> String {
        let mut t = String::from("experiment\tconfig\tstep\tmetric\tvalue\n");
        for l in self.lines() {
            let step = l.step.map_or_else(String::new, |s| s.to_string());
            let _ = writeln!(t, "{}\t{}\t{step}\t{}\t{:e}", self.experiment, l.config, l.metric, l.value);
        }
        t
    }

    /// Writes `report.json`, `metrics.jsonl` and `table.tsv` into `dir`,
    /// replacing earlier outputs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("report.json"), self)?;
        let log_path = dir.join("metrics.jsonl");
        if log_path.exists() {
            std::fs::remove_file(&log_path).map_err(|e| Error::io(&log_path, e))?;
        }
        let mut log = MetricsLog::open(&log_path)?;
        for l in self.lines() {
            log.write(&MetricRecord {
                experiment: self.experiment.clone(),
                config: l.config,
                epoch: None,
                step: l.step,
                metric: l.metric,
                value: l.value,
            })?;
        }
        let table_path = dir.join("table.tsv");
        std::fs::write(&table_path, self.table()).map_err(|e| Error::io(&table_path, e))
    }
}
