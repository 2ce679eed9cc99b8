//! Experiment driver: multi-task pretraining, meta-training, one-shot
//! adapt-and-evaluate, the fine-tuning learning-rate sweep and reports.

mod adapt;
mod config;
mod report;
mod run;
mod train;

pub use adapt::{
    adapt_eval, adapt_eval_many, adapt_task, lr_sweep, query_score, read_sweep_csv, write_score_csv, write_sweep_csv,
    AdaptationReport, SweepRow, TaskScore, SWEEP_ALPHAS,
};
pub use config::{Algo, ExperimentConfig, MetaSettings, Mode, PretrainSettings, Regime, TaskSettings, DATA_ROOT_ENV};
pub use report::{emit_report, reference_scores, EmittedReport, Report, ReportRow};
pub use run::{
    load_train_dev, make_tasks, meta_tasks, noise_profiles, pooled_examples, run_adapt_eval, run_lr_sweep,
    run_meta_train, run_pretrain, write_run_header, AdaptRun, SweepRun, TaskPaths, TrainRun, META_ALGOS,
};
pub use train::{read_loss_csv, train_meta, train_multitask, write_loss_csv, LossRow, MultitaskSettings, TrainOutcome};
