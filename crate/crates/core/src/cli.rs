//! Command-line front end. Every command takes an optional TOML run config;
//! flags override it, and the merged config is written next to the output.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{generate_synthetic_dataset, load_dataset, save_dataset, Label, ScmDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_generated, export_flat, fit_mdm, load_mdm, save_mdm};
use crate::pipeline::{run_pipeline, sample_class, train_on, write_json, Command, RunConfig};
use crate::sampler::SamplerMethod;
use crate::score::{load_checkpoint, save_checkpoint, NoiseSchedule, Optimizer};

#[derive(Debug, Parser)]
#[command(
    name = "scmgen",
    version,
    about = "Score-based generation and evaluation of spatial covariance matrices"
)]
pub struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Generate a seeded synthetic two-class dataset.
    GenData(GenDataArgs),
    /// Train a score network on one class (or all samples).
    Train(TrainArgs),
    /// Sample matrices from a checkpoint and project them to SPD.
    Sample(SampleArgs),
    /// Fit the minimum-distance-to-mean classifier.
    FitMdm(FitMdmArgs),
    /// Classify generated samples and compare Fréchet means with real data.
    Evaluate(EvaluateArgs),
    /// Export matrices as flat tab-separated rows.
    ExportFlat(ExportFlatArgs),
    /// gen-data, per-class train, sample and evaluate in one run directory.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of channels.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Number of frequency bands.
    #[arg(long)]
    pub bands: Option<usize>,
    /// Trials per class.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Class contrast in [0, 1).
    #[arg(long)]
    pub contrast: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output checkpoint file.
    #[arg(long)]
    pub out: PathBuf,
    /// Training iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Smallest noise level.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Largest noise level.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Initialization and minibatch seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on this class only.
    #[arg(long = "class")]
    pub class: Option<Label>,
    /// Parameter update rule.
    #[arg(long)]
    pub optimizer: Option<OptimizerArg>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sampler.
    #[arg(long)]
    pub method: Option<SamplerMethod>,
    /// Trials to generate.
    #[arg(long)]
    pub count: Option<usize>,
    /// Intended class; defaults to the class the checkpoint was trained on.
    #[arg(long = "class")]
    pub class: Option<Label>,
    /// Only this band; all bands of the checkpoint otherwise.
    #[arg(long)]
    pub band: Option<usize>,
    /// Sampler seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitMdmArgs {
    /// Training dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model file from fit-mdm.
    #[arg(long)]
    pub model: PathBuf,
    /// Generated dataset file.
    #[arg(long)]
    pub generated: PathBuf,
    /// Real dataset file.
    #[arg(long)]
    pub real: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportFlatArgs {
    /// Dataset files to export, in order.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output TSV file.
    #[arg(long)]
    pub out: PathBuf,
    /// Write raw entries instead of standardized ones.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Global seed; every stage seed is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory (default runs/<config hash prefix>).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Training iterations per class.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Real trials per class.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Generated trials per class.
    #[arg(long)]
    pub count: Option<usize>,
    /// Sampler.
    #[arg(long)]
    pub method: Option<SamplerMethod>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn load_config(path: Option<&Path>, command: Command) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = command;
    Ok(cfg)
}

fn override_schedule(cfg: &mut RunConfig, lo: Option<f64>, hi: Option<f64>) -> Result<()> {
    if lo.is_none() && hi.is_none() {
        return Ok(());
    }
    let s = cfg.train.schedule;
    cfg.train.schedule = NoiseSchedule::new(lo.unwrap_or(s.sigma_min()), hi.unwrap_or(s.sigma_max()))
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(())
}

fn snapshot_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

/// Writes the effective config beside a single-file output.
fn snapshot(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::write(snapshot_path(out), cfg.resolved().to_toml()?)?;
    Ok(())
}

fn record(cfg: &mut RunConfig, entries: &[(&str, &Path)]) {
    for (k, p) in entries {
        cfg.paths.insert((*k).into(), p.to_path_buf());
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage {
        stage: name.into(),
        source: Box::new(e),
    })
}

fn class_for(checkpoint: Option<Label>, flag: Option<Label>) -> Result<Label> {
    match (checkpoint, flag) {
        (Some(c), Some(f)) if c != f => Err(Error::Config(format!(
            "checkpoint was trained on class `{c}`, --class asks for `{f}`"
        ))),
        (_, Some(f)) => Ok(f),
        (Some(c), None) => Ok(c),
        (None, None) => Err(Error::Config("checkpoint has no class; pass --class".into())),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Commands::GenData(a) => {
            let mut cfg = load_config(config, Command::GenData)?;
            set(&mut cfg.data.channels, a.channels);
            set(&mut cfg.data.bands, a.bands);
            set(&mut cfg.data.trials_per_class, a.trials);
            set(&mut cfg.data.class_contrast, a.contrast);
            set(&mut cfg.data.seed, a.seed);
            cfg.seed = None;
            record(&mut cfg, &[("out", &a.out)]);
            cfg.data.validate().map_err(|e| Error::Config(e.to_string()))?;
            stage("gen-data", || {
                let d = generate_synthetic_dataset(&cfg.data)?;
                save_dataset(&d, &a.out)?;
                snapshot(&cfg, &a.out)?;
                log::info!("wrote {} samples to {}", d.len(), a.out.display());
                Ok(())
            })
        }
        Commands::Train(a) => {
            let mut cfg = load_config(config, Command::Train)?;
            set(&mut cfg.train.iterations, a.iters);
            set(&mut cfg.train.batch_size, a.batch);
            set(&mut cfg.train.learning_rate, a.lr);
            set(&mut cfg.train.seed, a.seed);
            if let Some(o) = a.optimizer {
                cfg.train.optimizer = match o {
                    OptimizerArg::Sgd => Optimizer::Sgd,
                    OptimizerArg::Adam => Optimizer::adam(),
                };
            }
            override_schedule(&mut cfg, a.sigma_min, a.sigma_max)?;
            cfg.seed = None;
            record(&mut cfg, &[("data", &a.data), ("out", &a.out)]);
            cfg.train.validate().map_err(|e| Error::Config(e.to_string()))?;
            stage("train", || {
                let real = load_dataset(&a.data)?;
                let (ck, report) = train_on(&cfg, &real, a.class)?;
                save_checkpoint(&ck, &a.out)?;
                snapshot(&cfg, &a.out)?;
                let (head, tail) = report.head_tail_medians(0.1);
                log::info!("median loss {head:.4} -> {tail:.4}; wrote {}", a.out.display());
                Ok(())
            })
        }
        Commands::Sample(a) => {
            let mut cfg = load_config(config, Command::Sample)?;
            set(&mut cfg.sampler.method, a.method);
            set(&mut cfg.sampler.seed, a.seed);
            set(&mut cfg.samples_per_class, a.count);
            cfg.seed = None;
            record(&mut cfg, &[("checkpoint", &a.checkpoint), ("out", &a.out)]);
            cfg.sampler.validate().map_err(|e| Error::Config(e.to_string()))?;
            let ck = stage("sample", || load_checkpoint(&a.checkpoint))?;
            let label = class_for(ck.label, a.class)?;
            stage("sample", || {
                let samples = sample_class(&cfg.sampler, &ck, label, cfg.samples_per_class, a.band)?;
                let d = ScmDataset::new(
                    ck.channels,
                    ck.network.config().bands,
                    crate::data::default_channel_names(ck.channels),
                    samples,
                    Some(cfg.sampler.seed),
                )?;
                save_dataset(&d, &a.out)?;
                snapshot(&cfg, &a.out)?;
                log::info!("wrote {} generated samples to {}", d.len(), a.out.display());
                Ok(())
            })
        }
        Commands::FitMdm(a) => {
            let mut cfg = load_config(config, Command::FitMdm)?;
            record(&mut cfg, &[("data", &a.data), ("out", &a.out)]);
            stage("fit-mdm", || {
                let model = fit_mdm(&load_dataset(&a.data)?)?;
                save_mdm(&model, &a.out)?;
                snapshot(&cfg, &a.out)
            })
        }
        Commands::Evaluate(a) => {
            let mut cfg = load_config(config, Command::Evaluate)?;
            record(
                &mut cfg,
                &[
                    ("model", &a.model),
                    ("generated", &a.generated),
                    ("real", &a.real),
                    ("report", &a.report),
                ],
            );
            stage("evaluate", || {
                let model = load_mdm(&a.model)?;
                let report = evaluate_generated(&model, &load_dataset(&a.generated)?, &load_dataset(&a.real)?)?;
                write_json(&report, &a.report)?;
                snapshot(&cfg, &a.report)?;
                log::info!(
                    "accuracy {:.4} over {} trials; mean distance {:.4}",
                    report.accuracy,
                    report.sample_count,
                    report.mean_distance
                );
                Ok(())
            })
        }
        Commands::ExportFlat(a) => {
            let mut cfg = load_config(config, Command::ExportFlat)?;
            for (i, p) in a.inputs.iter().enumerate() {
                cfg.paths.insert(format!("input{i}"), p.clone());
            }
            record(&mut cfg, &[("out", &a.out)]);
            stage("export-flat", || {
                let sets = a.inputs.iter().map(load_dataset).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&ScmDataset> = sets.iter().collect();
                let rows = export_flat(&refs, !a.raw, &a.out)?;
                snapshot(&cfg, &a.out)?;
                log::info!("wrote {rows} rows to {}", a.out.display());
                Ok(())
            })
        }
        Commands::Pipeline(a) => {
            let mut cfg = load_config(config, Command::Pipeline)?;
            if a.seed.is_some() {
                cfg.seed = a.seed;
            }
            if a.out_dir.is_some() {
                cfg.output_dir = a.out_dir;
            }
            set(&mut cfg.train.iterations, a.iters);
            set(&mut cfg.train.batch_size, a.batch);
            set(&mut cfg.train.learning_rate, a.lr);
            set(&mut cfg.data.trials_per_class, a.trials);
            set(&mut cfg.samples_per_class, a.count);
            set(&mut cfg.sampler.method, a.method);
            let out = run_pipeline(&cfg)?;
            if let Some(r) = out.report {
                println!(
                    "{}: accuracy {:.4}, real/generated distance {:.4}, real inter-class distance {:.4}",
                    out.output_dir.display(),
                    r.accuracy,
                    r.mean_distance,
                    r.real_inter_class_distance
                );
            }
            Ok(())
        }
    }
}
