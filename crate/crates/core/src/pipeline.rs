//! Reproducible end-to-end runs: synthetic data, per-class score training,
//! sampling, MDM evaluation. Every run directory gets the effective config
//! snapshot and a manifest of sha256-hashed artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic_dataset, save_dataset, Label, ScmDataset, ScmSample, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_generated, export_flat, fit_mdm, save_mdm, EvalReport};
use crate::sampler::{generate, SamplerConfig};
use crate::score::{
    save_checkpoint, train, Checkpoint, NetworkConfig, NoiseSchedule, Optimizer, ScoreNetwork, TrainConfig,
    TrainReport, TrainingSet,
};
use crate::spd::upper_len;

pub const MANIFEST_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenData,
    Train,
    Sample,
    FitMdm,
    Evaluate,
    ExportFlat,
    #[default]
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// When set, overrides every per-stage seed with one derived from it.
    pub seed: Option<u64>,
    /// Defaults to `runs/<config hash prefix>`.
    pub output_dir: Option<PathBuf>,
    /// Generated trials per class; each trial has one matrix per band.
    pub samples_per_class: usize,
    pub export_flat: bool,
    pub data: SynthConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    /// File arguments of a single-command run, recorded for the snapshot.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub paths: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    /// Desk scale: 5 channels, 3 bands, 200 trials per class, 5000 Adam
    /// iterations at batch 64. Plain SGD at this budget leaves most
    /// generated matrices indefinite.
    fn default() -> Self {
        Self {
            command: Command::Pipeline,
            seed: None,
            output_dir: None,
            samples_per_class: 200,
            export_flat: true,
            data: SynthConfig {
                bands: 3,
                ..SynthConfig::default()
            },
            network: NetworkConfig::default(),
            train: TrainConfig {
                iterations: 5000,
                batch_size: 64,
                optimizer: Optimizer::adam(),
                ..TrainConfig::default()
            },
            sampler: SamplerConfig::default(),
            paths: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    /// Parses a config file. Keys absent from the file keep the values of
    /// [`RunConfig::default`], also inside partially given blocks.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg_err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let user: toml::Table = toml::from_str(text).map_err(|e| cfg_err(&e))?;
        let mut merged = toml::Table::try_from(Self::default()).map_err(|e| cfg_err(&e))?;
        overlay(&mut merged, user);
        merged.try_into().map_err(|e| cfg_err(&e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the global seed and derives the network shape from the data
    /// block. Idempotent.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if let Some(s) = c.seed {
            c.data.seed = s;
            c.train.seed = s.wrapping_add(1000);
            c.sampler.seed = s.wrapping_add(2000);
        }
        c.network.input_dim = upper_len(c.data.channels);
        c.network.bands = c.data.bands;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.data.validate().map_err(cfg)?;
        self.network.validate().map_err(cfg)?;
        self.train.validate().map_err(cfg)?;
        self.sampler.validate().map_err(cfg)?;
        NoiseSchedule::new(self.train.schedule.sigma_min(), self.train.schedule.sigma_max()).map_err(cfg)?;
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be positive".into()));
        }
        Ok(())
    }

    /// sha256 of the resolved config, excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.resolved();
        c.output_dir = None;
        Ok(sha256_hex(c.to_toml()?.as_bytes()))
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        match &self.output_dir {
            Some(p) => Ok(p.clone()),
            None => Ok(PathBuf::from("runs").join(&self.hash()?[..12])),
        }
    }
}

fn overlay(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => overlay(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn label_offset(label: Label) -> u64 {
    Label::ALL.iter().position(|&l| l == label).expect("known label") as u64
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub stage: String,
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub version: u32,
    pub command: Command,
    pub config_hash: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Collects artifacts of one run and writes the config snapshot and
/// manifest.
pub struct RunDir {
    root: PathBuf,
    command: Command,
    config_hash: String,
    artifacts: Vec<Artifact>,
}

impl RunDir {
    /// Creates the directory and writes the config snapshot.
    pub fn create(cfg: &RunConfig, root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let mut run = Self {
            root: root.to_path_buf(),
            command: cfg.command,
            config_hash: cfg.hash()?,
            artifacts: Vec::new(),
        };
        fs::write(root.join(CONFIG_FILE), cfg.resolved().to_toml()?)?;
        run.record("config", CONFIG_FILE)?;
        Ok(run)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Hashes an artifact already written under the run directory.
    pub fn record(&mut self, stage: &str, rel: &str) -> Result<()> {
        let bytes = fs::read(self.root.join(rel))?;
        self.artifacts.push(Artifact {
            stage: stage.into(),
            path: rel.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Runs one stage, wrapping its error with the stage name.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        log::info!("stage {name}");
        f(self).map_err(|e| Error::Stage {
            stage: name.into(),
            source: Box::new(e),
        })
    }

    pub fn finish(self, outcome: &Result<()>) -> Result<Manifest> {
        let (status, failed_stage, error) = match outcome {
            Ok(()) => (RunStatus::Complete, None, None),
            Err(Error::Stage { stage, source }) => (RunStatus::Failed, Some(stage.clone()), Some(source.to_string())),
            Err(e) => (RunStatus::Failed, None, Some(e.to_string())),
        };
        let m = Manifest {
            version: MANIFEST_VERSION,
            command: self.command,
            config_hash: self.config_hash,
            status,
            failed_stage,
            error,
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        fs::write(self.root.join(MANIFEST_FILE), text + "\n")?;
        Ok(m)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Trains one score network on the samples of `label` (all samples when
/// `None`). The network shape follows the dataset.
pub fn train_on(cfg: &RunConfig, real: &ScmDataset, label: Option<Label>) -> Result<(Checkpoint, TrainReport)> {
    let cfg = cfg.resolved();
    let set = TrainingSet::from_dataset(real, label)?;
    let network = NetworkConfig {
        input_dim: upper_len(real.channel_count()),
        bands: real.band_count(),
        ..cfg.network.clone()
    };
    let offset = label.map_or(Label::ALL.len() as u64, label_offset);
    let mut net = ScoreNetwork::new(network, cfg.train.seed.wrapping_add(500 + offset))?;
    let tc = TrainConfig {
        seed: cfg.train.seed.wrapping_add(offset),
        ..cfg.train.clone()
    };
    let report = train(&mut net, &set, &tc)?;
    let ck = Checkpoint {
        network: net,
        schedule: tc.schedule,
        channels: real.channel_count(),
        seed: tc.seed,
        iteration: tc.iterations,
        label,
    };
    Ok((ck, report))
}

/// `count` generated trials of `label`, one matrix per band (or only
/// `band`). Each class samples from its own seed stream.
pub fn sample_class(
    cfg: &SamplerConfig,
    ck: &Checkpoint,
    label: Label,
    count: usize,
    band: Option<usize>,
) -> Result<Vec<ScmSample>> {
    let per_class = SamplerConfig {
        seed: cfg.seed.wrapping_add(label_offset(label)),
        ..cfg.clone()
    };
    let bands = match band {
        Some(b) => b..b + 1,
        None => 0..ck.network.config().bands,
    };
    let mut out = Vec::new();
    for b in bands {
        out.extend(generate(ck, &per_class, count, label, b)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub report: Option<EvalReport>,
}

/// gen-data → train (per class) → sample → evaluate. A failing stage
/// leaves its predecessors' artifacts on disk and marks the manifest failed.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let cfg = RunConfig {
        command: Command::Pipeline,
        ..cfg.resolved()
    };
    let root = cfg.output_dir()?;
    let mut run = RunDir::create(&cfg, &root)?;
    let mut report = None;
    let outcome = run_stages(&cfg, &mut run, &mut report);
    let manifest = run.finish(&outcome)?;
    outcome?;
    Ok(PipelineOutcome {
        output_dir: root,
        manifest,
        report,
    })
}

fn run_stages(cfg: &RunConfig, run: &mut RunDir, report: &mut Option<EvalReport>) -> Result<()> {
    let real = run.stage("gen-data", |run| {
        let d = generate_synthetic_dataset(&cfg.data)?;
        save_dataset(&d, run.path("real.jsonl"))?;
        run.record("gen-data", "real.jsonl")?;
        Ok(d)
    })?;

    let mut checkpoints = Vec::new();
    for label in Label::ALL {
        let stage = format!("train-{label}");
        let ck = run.stage(&stage, |run| {
            let (ck, tr) = train_on(cfg, &real, Some(label))?;
            let (ck_path, log_path) = (format!("checkpoint-{label}.ckpt"), format!("train-{label}.json"));
            save_checkpoint(&ck, run.path(&ck_path))?;
            write_json(&tr.trace, &run.path(&log_path))?;
            run.record(&stage, &ck_path)?;
            run.record(&stage, &log_path)?;
            Ok(ck)
        })?;
        checkpoints.push((label, ck));
    }

    let generated = run.stage("sample", |run| {
        let mut samples = Vec::new();
        for (label, ck) in &checkpoints {
            samples.extend(sample_class(&cfg.sampler, ck, *label, cfg.samples_per_class, None)?);
        }
        let d = ScmDataset::new(
            real.channel_count(),
            real.band_count(),
            real.channel_names().to_vec(),
            samples,
            Some(cfg.sampler.seed),
        )?;
        save_dataset(&d, run.path("generated.jsonl"))?;
        run.record("sample", "generated.jsonl")?;
        Ok(d)
    })?;

    let r = run.stage("evaluate", |run| {
        let model = fit_mdm(&real)?;
        save_mdm(&model, run.path("mdm.jsonl"))?;
        run.record("evaluate", "mdm.jsonl")?;
        let r = evaluate_generated(&model, &generated, &real)?;
        write_json(&r, &run.path("report.json"))?;
        run.record("evaluate", "report.json")?;
        Ok(r)
    })?;
    log::info!(
        "generated accuracy {:.4}, real/generated mean distance {:.4}, real inter-class distance {:.4}",
        r.accuracy,
        r.mean_distance,
        r.real_inter_class_distance
    );
    *report = Some(r);

    if cfg.export_flat {
        run.stage("export-flat", |run| {
            export_flat(&[&real, &generated], true, run.path("flat.tsv"))?;
            run.record("export-flat", "flat.tsv")
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.data.channels, 5);
        assert_eq!(c.data.bands, 3);
        assert_eq!(c.data.trials_per_class, 200);
        assert_eq!(c.train.iterations, 5000);
        assert_eq!(c.train.batch_size, 64);
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
        let partial = RunConfig::from_toml("[train]\niterations = 10").unwrap();
        assert_eq!(partial.train.iterations, 10);
        assert_eq!(partial.train.optimizer, c.train.optimizer);
        assert_eq!(partial.train.batch_size, 64);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = RunConfig::from_toml("sed = 3").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_toml("[train]\niterations = 0")
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn seed_resolution_and_hash() {
        let a = RunConfig {
            seed: Some(7),
            ..Default::default()
        };
        let r = a.resolved();
        assert_eq!(r.data.seed, 7);
        assert_eq!(r.network.input_dim, 15);
        assert_eq!(r.network.bands, 3);
        assert_eq!(r.resolved(), r);
        let b = RunConfig {
            output_dir: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c = RunConfig {
            seed: Some(8),
            ..a.clone()
        };
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
