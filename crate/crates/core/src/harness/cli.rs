use super::config::{resolve_data_path, ExperimentConfig, ExperimentKind, GenerateSpec, ModelTemplate, PdeChoice, Setting, DATA_DIR_ENV};
use super::{run_experiment, train_model};
use crate::error::{Error, Result};
use crate::pdegen::build_dataset;
use crate::persistence::{load_checkpoint, load_dataset, save_checkpoint, save_dataset, write_json, MetricRecord, MetricsLog};
use crate::training::{evaluate, TrainConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "kno", version, about = "Koopman neural operator toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a PDE family and save train/test trajectories.
    Generate(GenerateArgs),
    /// Train a model on a saved dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a saved dataset's test split.
    Eval(EvalArgs),
    /// Run one of the experiments described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PdeArg {
    Burgers,
    Ns,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML file holding a dataset spec; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub pde: Option<PdeArg>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Grid sizes to save; the largest is solved and the rest are strided
    /// copies of it.
    #[arg(long, value_delimiter = ',')]
    pub resolution: Vec<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt_internal: Option<f64>,
    /// Output directory; defaults to `$KNO_DATA_DIR/<pde>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory; defaults to `$KNO_DATA_DIR`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML file with optional `[model]` and `[train]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "kno-train")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Model size as `o,f,r`.
    #[arg(long)]
    pub setting: Option<Setting>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Rollout length; defaults to the checkpoint's training horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Evaluate on a strided copy at this grid size.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentArg {
    Mesh,
    Longterm,
    ZeroshotRes,
    ZeroshotLen,
    Ablation,
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(a: ExperimentArg) -> Self {
        match a {
            ExperimentArg::Mesh => ExperimentKind::MeshIndependence,
            ExperimentArg::Longterm => ExperimentKind::LongTerm,
            ExperimentArg::ZeroshotRes => ExperimentKind::ZeroshotResolution,
            ExperimentArg::ZeroshotLen => ExperimentKind::ZeroshotLength,
            ExperimentArg::Ablation => ExperimentKind::Ablation,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentArg,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Training resolution.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Model sizes as `o,f,r`; repeat to replace the config's list.
    #[arg(long)]
    pub setting: Vec<Setting>,
}

/// Contents of `kno train --config`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    model: ModelTemplate,
    train: TrainConfig,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn data_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    match flag {
        Some(p) => Ok(resolve_data_path(&p)),
        None => std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Usage(format!("no --data given and {DATA_DIR_ENV} is unset"))),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec: GenerateSpec = match &args.config {
        Some(path) => read_toml(path)?,
        None => GenerateSpec {
            pde: match args.pde {
                Some(PdeArg::Ns) => PdeChoice::NavierStokes,
                Some(PdeArg::Burgers) => PdeChoice::Burgers,
                None => return Err(Error::Usage("generate needs --pde or --config".into())),
            },
            nu: None,
            resolution: None,
            t_end: None,
            dt_internal: None,
            dt_record: None,
            n_train: 100,
            n_test: 20,
            seed: 0,
        },
    };
    if let Some(p) = args.pde {
        spec.pde = match p {
            PdeArg::Burgers => PdeChoice::Burgers,
            PdeArg::Ns => PdeChoice::NavierStokes,
        };
    }
    spec.nu = args.nu.or(spec.nu);
    spec.t_end = args.t_end.or(spec.t_end);
    spec.dt_internal = args.dt_internal.or(spec.dt_internal);
    spec.n_train = args.n_train.unwrap_or(spec.n_train);
    spec.n_test = args.n_test.unwrap_or(spec.n_test);
    spec.seed = args.seed.unwrap_or(spec.seed);
    let mut resolutions = args.resolution.clone();
    if let Some(&finest) = resolutions.iter().max() {
        spec.resolution = Some(finest);
    }
    let problem = spec.problem()?;
    if resolutions.is_empty() {
        resolutions.push(problem.s);
    }
    let out = match args.out {
        Some(o) => o,
        None => {
            let root = std::env::var_os(DATA_DIR_ENV)
                .ok_or_else(|| Error::Usage(format!("no --out given and {DATA_DIR_ENV} is unset")))?;
            let name = match spec.pde {
                PdeChoice::Burgers => "burgers",
                PdeChoice::NavierStokes => "navier_stokes",
            };
            Path::new(&root).join(name)
        }
    };
    let ds = build_dataset(&problem, spec.n_train, spec.n_test, spec.seed)?;
    let multi = resolutions.len() > 1;
    for &res in &resolutions {
        if res > problem.s || problem.s % res != 0 {
            return Err(Error::Usage(format!("resolution {res} does not divide {}", problem.s)));
        }
        let dir = if multi { out.join(format!("s{res}")) } else { out.clone() };
        let hash = save_dataset(&dir, &ds.downsample(problem.s / res)?)?;
        println!(
            "{}: {} trajectories ({} train, {} test), resolution {res}, {} snapshots over t in [0, {}], sha256 {hash}",
            dir.display(),
            spec.n_train + spec.n_test,
            spec.n_train,
            spec.n_test,
            ds.steps(),
            problem.t_end
        );
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let dir = data_dir(args.data)?;
    let ds = load_dataset(&dir)?;
    let mut file: TrainFile = match &args.config {
        Some(p) => read_toml(p)?,
        None => TrainFile::default(),
    };
    if let Some(seed) = args.seed {
        file.train.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        file.train.epochs = epochs;
    }
    let setting = args.setting.or(file.model.settings.first().copied()).ok_or_else(|| Error::Usage("no model setting".into()))?;
    let first = &ds.train[0];
    let mcfg = file.model.config(setting, first.dim(), first.channels());
    let trained = train_model(&ds, &mcfg, &file.train)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_checkpoint(&args.out.join("checkpoint"), &trained.checkpoint)?;
    let history_path = args.out.join("history.jsonl");
    if history_path.exists() {
        std::fs::remove_file(&history_path).map_err(|e| Error::io(&history_path, e))?;
    }
    let mut log = MetricsLog::open(&history_path)?;
    let echo = serde_json::json!({"model": mcfg, "train": file.train});
    for rec in &trained.history {
        for (metric, value) in [
            ("train_loss", rec.train.total),
            ("train_pred_loss", rec.train.pred_loss),
            ("train_recon_loss", rec.train.recon_loss),
            ("test_mse", rec.test.mse),
            ("test_rel_l2", rec.test.rel_l2),
            ("lr", rec.lr),
        ] {
            log.write(&MetricRecord {
                experiment: "train".into(),
                config: echo.clone(),
                epoch: Some(rec.epoch),
                step: None,
                metric: metric.into(),
                value,
            })?;
        }
    }
    write_json(&args.out.join("test_metrics.json"), &trained.test)?;
    println!(
        "trained {} parameters for {} epochs; test mse {:.6e}, rel_l2 {:.6e}",
        mcfg.count_parameters(),
        trained.history.len(),
        trained.test.mse,
        trained.test.rel_l2
    );
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let mut ds = load_dataset(&data_dir(args.data)?)?;
    if let Some(res) = args.resolution {
        if res == 0 || ds.size() % res != 0 {
            return Err(Error::Usage(format!("resolution {res} does not divide {}", ds.size())));
        }
        ds = ds.downsample(ds.size() / res)?;
    }
    let horizon = args.horizon.unwrap_or(ckpt.model().r_train);
    let m = evaluate(&ckpt, &ds.test, horizon)?;
    println!("{}", serde_json::to_string_pretty(&m).map_err(|e| Error::Format(e.to_string()))?);
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", args.config.display())))?;
    let kind = ExperimentKind::from(args.kind);
    let kind_value = toml::Value::try_from(kind).map_err(|e| Error::Format(e.to_string()))?;
    table.insert("experiment".into(), kind_value);
    let mut cfg = ExperimentConfig::from_toml(&toml::to_string(&table).map_err(|e| Error::Format(e.to_string()))?)?;
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(res) = args.resolution {
        cfg.params.train_resolution = Some(res);
    }
    if let Some(h) = args.horizon {
        cfg.params.horizon = Some(h);
    }
    if !args.setting.is_empty() {
        cfg.model.settings = args.setting;
    }
    let report = run_experiment(&cfg)?;
    print!("{}", report.table());
    println!("report written to {}", cfg.out.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
