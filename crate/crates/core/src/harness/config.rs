use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pdegen::{PdeKind, PdeProblem};
use crate::spectral::GrfParams;
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "KNO_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MeshIndependence,
    LongTerm,
    ZeroshotResolution,
    ZeroshotLength,
    Ablation,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::MeshIndependence => "mesh",
            ExperimentKind::LongTerm => "longterm",
            ExperimentKind::ZeroshotResolution => "zeroshot-res",
            ExperimentKind::ZeroshotLength => "zeroshot-len",
            ExperimentKind::Ablation => "ablation",
        }
    }
}

/// Which equation to solve, by short name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeChoice {
    Burgers,
    #[serde(alias = "ns")]
    NavierStokes,
}

/// A dataset to generate in memory. Unset fields take the equation's
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub pde: PdeChoice,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub dt_internal: Option<f64>,
    #[serde(default)]
    pub dt_record: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GenerateSpec {
    pub fn problem(&self) -> Result<PdeProblem> {
        let mut p = match self.pde {
            PdeChoice::Burgers => {
                let mut p = PdeProblem::burgers_default(self.resolution.unwrap_or(1024));
                if let Some(nu) = self.nu {
                    p.nu = nu;
                }
                p
            }
            PdeChoice::NavierStokes => {
                let mut p = PdeProblem::navier_stokes_default(self.nu.unwrap_or(1e-3));
                if let Some(s) = self.resolution {
                    p.s = s;
                }
                p
            }
        };
        if let Some(t) = self.t_end {
            p.t_end = t;
        }
        if let Some(dt) = self.dt_internal {
            p.dt_internal = dt;
        }
        if let Some(dt) = self.dt_record {
            p.dt_record = dt;
        }
        p.ic = match p.kind {
            PdeKind::Burgers1d => GrfParams::burgers(self.seed),
            PdeKind::NavierStokes2d => GrfParams::navier_stokes(self.seed),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Path { path: PathBuf },
    Generate(GenerateSpec),
}

/// One `(o, f, r)` model size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setting {
    pub o: usize,
    pub f: usize,
    pub r: usize,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Usage(format!("setting {s:?} is not o,f,r")))?;
        match parts[..] {
            [o, f, r] => Ok(Setting { o, f, r }),
            _ => Err(Error::Usage(format!("setting {s:?} is not o,f,r"))),
        }
    }
}

/// Architecture choices shared by every setting of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelTemplate {
    pub m: usize,
    pub units: usize,
    /// Append normalized grid coordinates to the encoder input.
    pub coords: bool,
    pub settings: Vec<Setting>,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        Self {
            m: 1,
            units: 1,
            coords: true,
            settings: vec![Setting { o: 16, f: 10, r: 10 }],
        }
    }
}

impl ModelTemplate {
    pub fn config(&self, setting: Setting, d: usize, c: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(d, setting.o, setting.f, setting.r);
        cfg.m = self.m;
        cfg.units = self.units;
        cfg.c = c;
        cfg.coord_channels = if self.coords { d } else { 0 };
        cfg
    }
}

/// Experiment-specific knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Resolution models are trained at (mesh, zeroshot-res).
    pub train_resolution: Option<usize>,
    /// Resolutions evaluated zero-shot (mesh, zeroshot-res).
    pub eval_resolutions: Vec<usize>,
    /// Evaluation rollout length (longterm, zeroshot-len extension).
    pub horizon: Option<usize>,
    /// Seeds for repeated training (ablation).
    pub seeds: Vec<u64>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            train_resolution: None,
            eval_resolutions: Vec::new(),
            horizon: None,
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub data: DataSource,
    #[serde(default)]
    pub model: ModelTemplate,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("kno-out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.settings.is_empty() {
            return Err(Error::Usage("experiment needs at least one (o, f, r) setting".into()));
        }
        self.train.validate()?;
        if let DataSource::Generate(spec) = &self.data {
            spec.problem()?;
            if spec.n_train == 0 || spec.n_test == 0 {
                return Err(Error::Usage("generated datasets need n_train, n_test >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Resolves a dataset path: relative paths that do not exist are looked up
/// under `KNO_DATA_DIR`.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(root) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&root).join(path);
        }
    }
    path.to_path_buf()
}
