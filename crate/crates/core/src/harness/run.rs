use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adapt::{adapt_eval, lr_sweep, write_score_csv, write_sweep_csv, AdaptationReport, SweepRow};
use super::config::{Algo, ExperimentConfig};
use super::report::{emit_report, EmittedReport, Report, ReportRow};
use super::train::{train_meta, train_multitask, write_loss_csv, MultitaskSettings, TrainOutcome};
use crate::error::{Error, Result};
use crate::metalearn::{MixtureExample, SeparationLearner, Task};
use crate::taskgen::{
    child_seed, enumerate_tasks, generate_tasks, load_manifest_tasks, write_manifest, NoiseColor, NoiseProfile, Role,
    SeparationTask, SpeakerPool, SpeakerSpec, TaskOptions,
};
use crate::tasnet::{load_checkpoint, save_checkpoint, ConvTasNet, ModelParams};

#[derive(Clone, Debug, PartialEq)]
pub struct TaskPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub test_noisy: Option<PathBuf>,
}

fn synthetic_pool(prefix: &str, count: usize, cfg: &ExperimentConfig) -> Result<SpeakerPool> {
    let specs: Vec<SpeakerSpec> = (0..count)
        .map(|i| {
            let id = format!("{prefix}{i:02}");
            let seed = child_seed(cfg.seed, &format!("speaker-{id}"));
            SpeakerSpec::random(id, seed)
        })
        .collect();
    SpeakerPool::synthetic(
        &specs,
        cfg.tasks.utterances_per_speaker,
        cfg.tasks.duration_s,
        cfg.model.sample_rate,
    )
}

/// Noise profiles used for the noisy test manifest.
pub fn noise_profiles(seed: u64, sample_rate: u32) -> Vec<NoiseProfile> {
    let len = 2 * sample_rate as usize;
    vec![
        NoiseProfile::synthetic("white", NoiseColor::White, len, sample_rate, child_seed(seed, "noise-white")),
        NoiseProfile::synthetic("brown", NoiseColor::Brown, len, sample_rate, child_seed(seed, "noise-brown")),
    ]
}

/// Builds the training manifest (train and dev roles) and the clean and,
/// with `cfg.noise`, noisy test manifests under `cfg.data_root`.
pub fn make_tasks(cfg: &ExperimentConfig) -> Result<TaskPaths> {
    let train_pool = match &cfg.tasks.corpus_dir {
        Some(dir) => SpeakerPool::from_dir(dir)?,
        None => synthetic_pool("tr", cfg.tasks.train_speakers, cfg)?,
    };
    let test_pool = match &cfg.tasks.test_corpus_dir {
        Some(dir) => SpeakerPool::from_dir(dir)?,
        None => synthetic_pool("te", cfg.tasks.test_speakers, cfg)?,
    };
    if train_pool.sample_rate() != cfg.model.sample_rate || test_pool.sample_rate() != cfg.model.sample_rate {
        return Err(Error::InvalidConfig("speaker pools must be at the model sample rate".into()));
    }

    let train_specs = enumerate_tasks(&train_pool);
    if cfg.tasks.dev_tasks >= train_specs.len() {
        return Err(Error::InvalidConfig(format!(
            "{} dev tasks requested from only {} training pairs",
            cfg.tasks.dev_tasks,
            train_specs.len()
        )));
    }
    let mut order: Vec<usize> = (0..train_specs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, "dev-split")));
    let dev: Vec<usize> = order[..cfg.tasks.dev_tasks].to_vec();
    let clean = TaskOptions::default();
    let train_tasks = generate_tasks(&train_pool, &train_specs, child_seed(cfg.seed, "train-tasks"), &clean)?;
    let tagged: Vec<(Role, SeparationTask)> = train_tasks
        .into_iter()
        .enumerate()
        .map(|(i, t)| (if dev.contains(&i) { Role::Dev } else { Role::Train }, t))
        .collect();
    let sr = cfg.model.sample_rate;
    let paths = TaskPaths {
        train: cfg.data_root.join("train.jsonl"),
        test: cfg.data_root.join("test.jsonl"),
        test_noisy: cfg.noise.then(|| cfg.data_root.join("test_noisy.jsonl")),
    };
    write_manifest(&paths.train, &tagged, &[], sr)?;

    let test_specs = enumerate_tasks(&test_pool);
    let test_seed = child_seed(cfg.seed, "test-tasks");
    let as_test = |tasks: Vec<SeparationTask>| tasks.into_iter().map(|t| (Role::Test, t)).collect::<Vec<_>>();
    let test = generate_tasks(&test_pool, &test_specs, test_seed, &clean)?;
    write_manifest(&paths.test, &as_test(test), &[], sr)?;
    if let Some(noisy_path) = &paths.test_noisy {
        let profiles = noise_profiles(cfg.seed, sr);
        let opts = TaskOptions {
            noise: Some(profiles.clone()),
            ..TaskOptions::default()
        };
        let noisy = generate_tasks(&test_pool, &test_specs, test_seed, &opts)?;
        write_manifest(noisy_path, &as_test(noisy), &profiles, sr)?;
    }
    info!(
        "wrote {} training pairs ({} dev) and {} test pairs",
        train_specs.len(),
        dev.len(),
        test_specs.len()
    );
    Ok(paths)
}

/// Train- and dev-role tasks of a training manifest.
pub fn load_train_dev(path: &Path) -> Result<(Vec<SeparationTask>, Vec<SeparationTask>)> {
    let mut train = Vec::new();
    let mut dev = Vec::new();
    for (role, t) in load_manifest_tasks(path)? {
        match role {
            Role::Train => train.push(t),
            Role::Dev => dev.push(t),
            Role::Test => {}
        }
    }
    if train.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            reason: "no training tasks".into(),
        });
    }
    Ok((train, dev))
}

/// Every support and query mixture of the tasks, pooled.
pub fn pooled_examples(tasks: &[SeparationTask]) -> Vec<MixtureExample> {
    tasks
        .iter()
        .flat_map(|t| t.support.iter().chain(&t.query).map(|m| m.to_example()))
        .collect()
}

pub fn meta_tasks(tasks: &[SeparationTask]) -> Vec<Task<MixtureExample>> {
    tasks.iter().map(SeparationTask::to_meta_task).collect()
}

fn initial_params(cfg: &ExperimentConfig, model: &ConvTasNet) -> Result<ModelParams> {
    match &cfg.init_checkpoint {
        Some(path) => {
            let (c, p) = load_checkpoint(path)?;
            if c != cfg.model {
                return Err(Error::Checkpoint(format!(
                    "{} was saved with a different model configuration",
                    path.display()
                )));
            }
            Ok(p)
        }
        None => Ok(model.init_params(cfg.seed)),
    }
}

fn learner_for(cfg: &ExperimentConfig) -> Result<SeparationLearner> {
    Ok(SeparationLearner::new(ConvTasNet::new(cfg.model)?))
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub dir: PathBuf,
    pub best: PathBuf,
    pub half: Option<PathBuf>,
    pub last: PathBuf,
    pub loss_csv: PathBuf,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    best_epoch: usize,
    epochs: usize,
    history: &'a [super::train::LossRow],
}

fn save_run(cfg: &ExperimentConfig, dir: PathBuf, outcome: TrainOutcome) -> Result<TrainRun> {
    std::fs::create_dir_all(&dir)?;
    let run = TrainRun {
        best: dir.join("best.ckpt"),
        half: outcome.half.as_ref().map(|_| dir.join("half.ckpt")),
        last: dir.join("final.ckpt"),
        loss_csv: dir.join("loss.csv"),
        dir,
        outcome,
    };
    save_checkpoint(&run.best, &cfg.model, &run.outcome.best)?;
    if let (Some(path), Some(p)) = (&run.half, &run.outcome.half) {
        save_checkpoint(path, &cfg.model, p)?;
    }
    save_checkpoint(&run.last, &cfg.model, &run.outcome.final_params)?;
    write_loss_csv(&run.loss_csv, &run.outcome.history)?;
    let summary = TrainSummary {
        best_epoch: run.outcome.best_epoch,
        epochs: cfg.epochs,
        history: &run.outcome.history,
    };
    std::fs::write(run.dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(run)
}

/// Multi-task pretraining over the pooled mixtures of the training tasks.
/// Writes `best`, `half` and `final` checkpoints and `loss.csv` under
/// `<out_dir>/pretrain`.
pub fn run_pretrain(cfg: &ExperimentConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let (train, dev) = load_train_dev(&cfg.train_manifest_path())?;
    let learner = learner_for(cfg)?;
    let init = initial_params(cfg, &learner.model)?;
    let settings = MultitaskSettings {
        epochs: cfg.epochs,
        lr: cfg.pretrain.lr,
        batch_size: cfg.pretrain.batch_size,
        optimizer: cfg.pretrain.optimizer,
        half_epoch: Some(cfg.pretrain.half_epoch.unwrap_or(cfg.epochs / 2)),
        seed: child_seed(cfg.seed, "pretrain-order"),
    };
    let outcome = train_multitask(&learner, &init, &pooled_examples(&train), &pooled_examples(&dev), &settings)?;
    save_run(cfg, cfg.out_dir.join("pretrain"), outcome)
}

/// Meta-training with `cfg.algo`. Writes `best` and `final` checkpoints and
/// `loss.csv` under `<out_dir>/meta_<algo>`.
pub fn run_meta_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let partition = cfg.algo.partition().ok_or_else(|| {
        Error::InvalidConfig("meta-training needs algo maml, anil_s or anil_c; use pretrain for multitask".into())
    })?;
    let (train, dev) = load_train_dev(&cfg.train_manifest_path())?;
    let learner = learner_for(cfg)?;
    let init = initial_params(cfg, &learner.model)?;
    let outcome = train_meta(
        &learner,
        &init,
        &meta_tasks(&train),
        &meta_tasks(&dev),
        &cfg.meta_config(partition),
        cfg.epochs,
        child_seed(cfg.seed, "meta-order"),
    )?;
    save_run(cfg, cfg.out_dir.join(format!("meta_{}", cfg.algo)), outcome)
}

fn load_eval_checkpoint(cfg: &ExperimentConfig) -> Result<(SeparationLearner, ModelParams, String)> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("a checkpoint is required".into()))?;
    let (model_cfg, params) = load_checkpoint(path)?;
    let learner = SeparationLearner::new(ConvTasNet::new(model_cfg)?);
    let tag = cfg
        .pretrain_tag
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    Ok((learner, params, tag))
}

fn manifest_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "test".into())
}

fn load_test(path: &Path) -> Result<Vec<SeparationTask>> {
    Ok(load_manifest_tasks(path)?.into_iter().map(|(_, t)| t).collect())
}

#[derive(Clone, Debug)]
pub struct AdaptRun {
    /// One report per test manifest, in order.
    pub reports: Vec<(String, AdaptationReport)>,
    pub table: Report,
    pub emitted: EmittedReport,
}

/// One-shot adapt-and-evaluate on every test manifest. Writes per-task score
/// CSVs and a one-row report under `<out_dir>/adapt_eval`.
pub fn run_adapt_eval(cfg: &ExperimentConfig) -> Result<AdaptRun> {
    let (learner, params, tag) = load_eval_checkpoint(cfg)?;
    let dir = cfg.out_dir.join("adapt_eval");
    let name = format!("{}_{}_{}_{}", cfg.algo, tag, cfg.finetune_regime, cfg.alpha);
    let mut reports = Vec::new();
    for path in cfg.test_manifest_paths() {
        let tasks = load_test(&path)?;
        let report = adapt_eval(&learner, &params, &tasks, cfg.finetune_regime, cfg.alpha)?;
        let stem = manifest_stem(&path);
        write_score_csv(&dir.join(format!("{name}_{stem}.csv")), &report.rows)?;
        reports.push((stem, report));
    }
    let mut table = Report::new(reports.iter().map(|(s, _)| s.clone()).collect());
    table.push(ReportRow::new(
        cfg.algo.label(),
        &tag,
        cfg.finetune_regime.tag(),
        reports.iter().map(|(_, r)| r.mean_post()).collect(),
    ))?;
    let emitted = emit_report(&table, &dir, &name)?;
    Ok(AdaptRun {
        reports,
        table,
        emitted,
    })
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<AdaptationReport>,
    pub csv: PathBuf,
}

/// Learning-rate sweep over the pooled tasks of every test manifest.
/// Writes `sweep.csv` and `sweep_scores.csv` under `<out_dir>/sweep_lr`.
pub fn run_lr_sweep(cfg: &ExperimentConfig) -> Result<SweepRun> {
    let (learner, params, _) = load_eval_checkpoint(cfg)?;
    let mut tasks = Vec::new();
    for path in cfg.test_manifest_paths() {
        let stem = manifest_stem(&path);
        tasks.extend(load_test(&path)?.into_iter().map(|mut t| {
            t.task_id = format!("{stem}/{}", t.task_id);
            t
        }));
    }
    let (rows, reports) = lr_sweep(&learner, &params, &tasks)?;
    let dir = cfg.out_dir.join("sweep_lr");
    let csv = dir.join("sweep.csv");
    write_sweep_csv(&csv, &rows)?;
    let all: Vec<_> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    write_score_csv(&dir.join("sweep_scores.csv"), &all)?;
    Ok(SweepRun { rows, reports, csv })
}

/// Writes `<dir>/<command>.run.json` with the command line flags and the
/// resolved configuration.
pub fn write_run_header(dir: &Path, command: &str, flags: serde_json::Value, cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{command}.run.json"));
    let header = serde_json::json!({
        "command": command,
        "flags": flags,
        "config": cfg,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(&path, serde_json::to_string_pretty(&header)?)?;
    Ok(path)
}

/// Algorithms with a meta-training phase.
pub const META_ALGOS: [Algo; 3] = [Algo::Maml, Algo::AnilS, Algo::AnilC];
