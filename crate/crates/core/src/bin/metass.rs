use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use metass::harness::{
    make_tasks, reference_scores, run_adapt_eval, run_lr_sweep, run_meta_train, run_pretrain, write_run_header,
    Algo, ExperimentConfig, Mode, Regime, DATA_ROOT_ENV,
};
use metass::metalearn::OptimizerKind;

/// One-shot speaker adaptation for time-domain speech separation.
#[derive(Parser, Serialize)]
#[command(version, about)]
struct Cli {
    /// TOML experiment configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the task manifests.
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    data_root: Option<PathBuf>,
    /// Output directory for checkpoints and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Generate synthetic speakers, tasks and manifests.
    MakeTasks(MakeTasks),
    /// Multi-task pretraining.
    Pretrain(Pretrain),
    /// Meta-training with MAML or ANIL.
    MetaTrain(MetaTrain),
    /// One-shot adaptation and evaluation on the test manifests.
    AdaptEval(AdaptEval),
    /// Fine-tuning learning-rate sweep for every regime.
    SweepLr(SweepLr),
    /// Print the published reference scores.
    Reference,
}

#[derive(Args, Serialize)]
struct MakeTasks {
    #[arg(long)]
    train_speakers: Option<usize>,
    #[arg(long)]
    test_speakers: Option<usize>,
    #[arg(long)]
    utterances: Option<usize>,
    /// Utterance length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    dev_tasks: Option<usize>,
    /// Skip the noisy test manifest.
    #[arg(long)]
    no_noise: bool,
    /// Real training corpus: one subdirectory of WAV files per speaker.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[arg(long)]
    test_corpus_dir: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct Pretrain {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    half_epoch: Option<usize>,
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MetaTrain {
    /// maml, anil_s or anil_c
    #[arg(long)]
    algo: Algo,
    /// Starting checkpoint; a fresh initialization when omitted.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AdaptEval {
    #[arg(long)]
    checkpoint: PathBuf,
    /// m, a_s, a_c or none
    #[arg(long)]
    regime: Regime,
    #[arg(long)]
    alpha: Option<f64>,
    /// Test manifest; repeatable. Defaults to the manifests under the data root.
    #[arg(long)]
    manifest: Vec<PathBuf>,
    /// Method label for the report row.
    #[arg(long)]
    algo: Option<Algo>,
    /// Pretraining label for the report row.
    #[arg(long)]
    pretrain_tag: Option<String>,
}

#[derive(Args, Serialize)]
struct SweepLr {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: Vec<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.data_root, cli.data_root.clone());
    set(&mut cfg.out_dir, cli.out.clone());
    set(&mut cfg.seed, cli.seed);
    match &cli.command {
        Command::MakeTasks(a) => {
            cfg.mode = Mode::MakeTasks;
            set(&mut cfg.tasks.train_speakers, a.train_speakers);
            set(&mut cfg.tasks.test_speakers, a.test_speakers);
            set(&mut cfg.tasks.utterances_per_speaker, a.utterances);
            set(&mut cfg.tasks.duration_s, a.duration);
            set(&mut cfg.tasks.dev_tasks, a.dev_tasks);
            if a.no_noise {
                cfg.noise = false;
            }
            if a.corpus_dir.is_some() {
                cfg.tasks.corpus_dir = a.corpus_dir.clone();
            }
            if a.test_corpus_dir.is_some() {
                cfg.tasks.test_corpus_dir = a.test_corpus_dir.clone();
            }
        }
        Command::Pretrain(a) => {
            cfg.mode = Mode::Pretrain;
            cfg.algo = Algo::Multitask;
            set(&mut cfg.epochs, a.epochs);
            set(&mut cfg.pretrain.lr, a.lr);
            set(&mut cfg.pretrain.batch_size, a.batch_size);
            set(&mut cfg.pretrain.optimizer, a.optimizer);
            if a.half_epoch.is_some() {
                cfg.pretrain.half_epoch = a.half_epoch;
            }
            if a.init.is_some() {
                cfg.init_checkpoint = a.init.clone();
            }
            if a.train_manifest.is_some() {
                cfg.train_manifest = a.train_manifest.clone();
            }
        }
        Command::MetaTrain(a) => {
            cfg.mode = Mode::MetaTrain;
            cfg.algo = a.algo;
            set(&mut cfg.epochs, a.epochs);
            set(&mut cfg.alpha, a.alpha);
            set(&mut cfg.beta, a.beta);
            set(&mut cfg.meta.batch_size, a.batch_size);
            set(&mut cfg.meta.inner_steps, a.inner_steps);
            if a.init.is_some() {
                cfg.init_checkpoint = a.init.clone();
            }
            if a.train_manifest.is_some() {
                cfg.train_manifest = a.train_manifest.clone();
            }
        }
        Command::AdaptEval(a) => {
            cfg.mode = Mode::AdaptEval;
            cfg.checkpoint = Some(a.checkpoint.clone());
            cfg.finetune_regime = a.regime;
            set(&mut cfg.alpha, a.alpha);
            set(&mut cfg.algo, a.algo);
            if a.pretrain_tag.is_some() {
                cfg.pretrain_tag = a.pretrain_tag.clone();
            }
            if !a.manifest.is_empty() {
                cfg.test_manifests = a.manifest.clone();
            }
        }
        Command::SweepLr(a) => {
            cfg.mode = Mode::SweepLr;
            cfg.checkpoint = Some(a.checkpoint.clone());
            if !a.manifest.is_empty() {
                cfg.test_manifests = a.manifest.clone();
            }
        }
        Command::Reference => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::MakeTasks(_) => "make-tasks",
        Command::Pretrain(_) => "pretrain",
        Command::MetaTrain(_) => "meta-train",
        Command::AdaptEval(_) => "adapt-eval",
        Command::SweepLr(_) => "sweep-lr",
        Command::Reference => "reference",
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Command::Reference = cli.command {
        print!("{}", reference_scores().to_table());
        return Ok(());
    }
    let cfg = resolve(&cli)?;
    let name = command_name(&cli.command);
    let header = write_run_header(&cfg.out_dir, name, serde_json::to_value(&cli)?, &cfg)?;
    log::info!("run header: {}", header.display());
    match &cli.command {
        Command::MakeTasks(_) => {
            let p = make_tasks(&cfg)?;
            println!("train manifest: {}", p.train.display());
            println!("test manifest:  {}", p.test.display());
            if let Some(n) = p.test_noisy {
                println!("noisy test:     {}", n.display());
            }
        }
        Command::Pretrain(_) | Command::MetaTrain(_) => {
            let run = if name == "pretrain" {
                run_pretrain(&cfg)?
            } else {
                run_meta_train(&cfg)?
            };
            println!("best epoch {} -> {}", run.outcome.best_epoch, run.best.display());
            println!("final -> {}", run.last.display());
            println!("losses -> {}", run.loss_csv.display());
        }
        Command::AdaptEval(_) => {
            let run = run_adapt_eval(&cfg)?;
            for (stem, r) in &run.reports {
                println!(
                    "{stem}: pre {:.2} dB, post {:.2} dB ({} tasks)",
                    r.mean_pre(),
                    r.mean_post(),
                    r.rows.len()
                );
            }
            print!("{}", run.table.to_table());
        }
        Command::SweepLr(_) => {
            let run = run_lr_sweep(&cfg)?;
            for r in &run.rows {
                println!("{:<4} {:>8.0e}  {:>7.3} dB  (std {:.3})", r.regime, r.alpha, r.mean_sisnri, r.std);
            }
            println!("sweep -> {}", run.csv.display());
        }
        Command::Reference => unreachable!(),
    }
    Ok(())
}
