use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metalearn::{MetaConfig, MetaGradMode, OptimizerKind};
use crate::tasnet::{ModelConfig, Partition};

/// Environment variable naming the default data root.
pub const DATA_ROOT_ENV: &str = "METASS_DATA_ROOT";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MakeTasks,
    #[default]
    Pretrain,
    MetaTrain,
    AdaptEval,
    SweepLr,
}

/// Training method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    #[default]
    Multitask,
    Maml,
    AnilS,
    AnilC,
}

impl Algo {
    /// Tensors the inner loop adapts. `None` for the multi-task baseline.
    pub fn partition(self) -> Option<Partition> {
        match self {
            Algo::Multitask => None,
            Algo::Maml => Some(Partition::WholeModel),
            Algo::AnilS => Some(Partition::SeparatorOnly),
            Algo::AnilC => Some(Partition::AutoencoderOnly),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Multitask => "multitask",
            Algo::Maml => "maml",
            Algo::AnilS => "anil_s",
            Algo::AnilC => "anil_c",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Algo::Multitask => "Multitask",
            Algo::Maml => "MAML",
            Algo::AnilS => "ANIL_s",
            Algo::AnilC => "ANIL_c",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multitask" => Ok(Algo::Multitask),
            "maml" => Ok(Algo::Maml),
            "anil_s" => Ok(Algo::AnilS),
            "anil_c" => Ok(Algo::AnilC),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Fine-tuning regime: which tensors one-shot adaptation may update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[default]
    #[serde(rename = "m")]
    M,
    #[serde(rename = "a_s")]
    AS,
    #[serde(rename = "a_c")]
    AC,
    #[serde(rename = "none")]
    None,
}

impl Regime {
    pub const ADAPTING: [Regime; 3] = [Regime::M, Regime::AS, Regime::AC];

    pub fn partition(self) -> Option<Partition> {
        match self {
            Regime::M => Some(Partition::WholeModel),
            Regime::AS => Some(Partition::SeparatorOnly),
            Regime::AC => Some(Partition::AutoencoderOnly),
            Regime::None => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Regime::M => "m",
            Regime::AS => "a_s",
            Regime::AC => "a_c",
            Regime::None => "-",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::None => "none",
            r => r.tag(),
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(Regime::M),
            "a_s" => Ok(Regime::AS),
            "a_c" => Ok(Regime::AC),
            "none" | "-" => Ok(Regime::None),
            other => Err(Error::InvalidConfig(format!("unknown fine-tuning regime {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Epoch saved as the "half" checkpoint; defaults to `epochs / 2`.
    pub half_epoch: Option<usize>,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        PretrainSettings {
            lr: 1e-3,
            batch_size: 4,
            optimizer: OptimizerKind::Sgd,
            half_epoch: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSettings {
    pub batch_size: usize,
    pub inner_steps: usize,
    pub grad_mode: MetaGradMode,
}

impl Default for MetaSettings {
    fn default() -> Self {
        MetaSettings {
            batch_size: 4,
            inner_steps: 1,
            grad_mode: MetaGradMode::FirstOrder,
        }
    }
}

/// Synthetic corpus layout for `make-tasks`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSettings {
    pub train_speakers: usize,
    pub test_speakers: usize,
    pub utterances_per_speaker: usize,
    pub duration_s: f64,
    /// Training pairs held out for model selection.
    pub dev_tasks: usize,
    /// Directory of speaker subdirectories with WAV files; replaces the
    /// synthetic training pool when set.
    pub corpus_dir: Option<PathBuf>,
    pub test_corpus_dir: Option<PathBuf>,
}

impl Default for TaskSettings {
    fn default() -> Self {
        TaskSettings {
            train_speakers: 12,
            test_speakers: 6,
            utterances_per_speaker: 4,
            duration_s: 1.0,
            dev_tasks: 6,
            corpus_dir: None,
            test_corpus_dir: None,
        }
    }
}

/// Everything a run needs; loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algo: Algo,
    pub finetune_regime: Regime,
    /// Inner-loop and fine-tuning learning rate.
    pub alpha: f64,
    /// Outer learning rate.
    pub beta: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Also build and evaluate noisy test tasks.
    pub noise: bool,
    pub data_root: PathBuf,
    pub out_dir: PathBuf,
    pub train_manifest: Option<PathBuf>,
    pub test_manifests: Vec<PathBuf>,
    pub init_checkpoint: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Pretraining label for report rows; defaults to the checkpoint's
    /// file stem.
    pub pretrain_tag: Option<String>,
    pub model: ModelConfig,
    pub pretrain: PretrainSettings,
    pub meta: MetaSettings,
    pub tasks: TaskSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::default(),
            algo: Algo::default(),
            finetune_regime: Regime::default(),
            alpha: 0.01,
            beta: 1e-4,
            epochs: 10,
            seed: 0,
            noise: true,
            data_root: PathBuf::from("data"),
            out_dir: PathBuf::from("runs"),
            train_manifest: None,
            test_manifests: Vec::new(),
            init_checkpoint: None,
            checkpoint: None,
            pretrain_tag: None,
            model: ModelConfig::default(),
            pretrain: PretrainSettings::default(),
            meta: MetaSettings::default(),
            tasks: TaskSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.pretrain.batch_size == 0 {
            return Err(Error::InvalidConfig("pretrain batch_size must be at least 1".into()));
        }
        if self.pretrain.lr.is_nan() || self.pretrain.lr < 0.0 {
            return Err(Error::InvalidConfig("pretrain lr must be nonnegative".into()));
        }
        if let Some(h) = self.pretrain.half_epoch {
            if h > self.epochs {
                return Err(Error::InvalidConfig(format!("half_epoch {h} exceeds epochs {}", self.epochs)));
            }
        }
        self.meta_config(self.algo.partition().unwrap_or(Partition::WholeModel))
            .validate()
    }

    pub fn train_manifest_path(&self) -> PathBuf {
        self.train_manifest
            .clone()
            .unwrap_or_else(|| self.data_root.join("train.jsonl"))
    }

    /// Explicit test manifests, or the clean manifest under the data root
    /// plus the noisy one when `noise` is set and it exists.
    pub fn test_manifest_paths(&self) -> Vec<PathBuf> {
        if !self.test_manifests.is_empty() {
            return self.test_manifests.clone();
        }
        let mut v = vec![self.data_root.join("test.jsonl")];
        let noisy = self.data_root.join("test_noisy.jsonl");
        if self.noise && noisy.exists() {
            v.push(noisy);
        }
        v
    }

    pub fn meta_config(&self, partition: Partition) -> MetaConfig {
        MetaConfig {
            alpha: self.alpha,
            beta: self.beta,
            batch_size: self.meta.batch_size,
            inner_steps: self.meta.inner_steps,
            partition,
            meta_grad_mode: self.meta.grad_mode,
            ..MetaConfig::default()
        }
    }
}
