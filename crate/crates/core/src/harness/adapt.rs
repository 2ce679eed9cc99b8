use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Regime;
use crate::error::{Error, Result};
use crate::metalearn::{finetune, MetaConfig, SeparationLearner};
use crate::objective::aligned_si_snri;
use crate::taskgen::{SeparationTask, TaskMixture};
use crate::tasnet::ModelParams;

/// Fine-tuning learning rates swept by [`lr_sweep`].
pub const SWEEP_ALPHAS: [f64; 10] = [1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2];

/// Scores of one task before and after one-shot adaptation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub pre: f64,
    pub post: f64,
    pub regime: Regime,
    pub alpha: f64,
}

impl TaskScore {
    pub fn delta(&self) -> f64 {
        self.post - self.pre
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub regime: Regime,
    pub alpha: f64,
    pub rows: Vec<TaskScore>,
}

impl AdaptationReport {
    pub fn mean_pre(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.pre))
    }

    pub fn mean_post(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.post))
    }

    pub fn std_post(&self) -> f64 {
        std_dev(&self.rows.iter().map(|r| r.post).collect::<Vec<_>>())
    }

    pub fn mean_delta(&self) -> f64 {
        mean(self.rows.iter().map(TaskScore::delta))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_score_csv(path, &self.rows)
    }
}

pub fn write_score_csv(path: &Path, rows: &[TaskScore]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task_id", "pre", "post", "regime", "alpha"])?;
    for r in rows {
        w.write_record([
            r.task_id.clone(),
            r.pre.to_string(),
            r.post.to_string(),
            r.regime.to_string(),
            r.alpha.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean over the query mixtures of the uPIT-aligned SI-SNRi (itself a mean
/// over sources).
pub fn query_score(learner: &SeparationLearner, params: &ModelParams, query: &[TaskMixture]) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::InvalidConfig("empty query set".into()));
    }
    let mut total = 0.0;
    for m in query {
        let est = learner.model.separate_signal(params, &m.mixture)?;
        let est: Vec<&[f64]> = est.iter().map(Vec::as_slice).collect();
        let refs: Vec<&[f64]> = m.references.iter().map(Vec::as_slice).collect();
        total += aligned_si_snri(&est, &refs, &m.mixture, &learner.opts)?;
    }
    Ok(total / query.len() as f64)
}

/// One-shot fine-tuning of `params` on the task's support mixture under a
/// regime. `Regime::None` returns the parameters unchanged.
pub fn adapt_task(
    learner: &SeparationLearner,
    params: &ModelParams,
    task: &SeparationTask,
    regime: Regime,
    alpha: f64,
) -> Result<ModelParams> {
    let Some(partition) = regime.partition() else {
        return Ok(params.clone());
    };
    if task.support.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "task {} has {} support mixtures, one-shot adaptation needs exactly one",
            task.task_id,
            task.support.len()
        )));
    }
    let cfg = MetaConfig {
        alpha,
        partition,
        inner_steps: 1,
        ..MetaConfig::default()
    };
    let support = [task.support[0].to_example()];
    finetune(learner, params, &support, &cfg)
}

/// Adapt-and-evaluate for several (regime, alpha) settings. Each task's
/// pre-adaptation score is computed once and shared by all settings.
pub fn adapt_eval_many(
    learner: &SeparationLearner,
    params: &ModelParams,
    tasks: &[SeparationTask],
    settings: &[(Regime, f64)],
) -> Result<Vec<AdaptationReport>> {
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("no test tasks".into()));
    }
    let per_task: Vec<Vec<TaskScore>> = tasks
        .par_iter()
        .map(|task| {
            let pre = query_score(learner, params, &task.query)?;
            settings
                .iter()
                .map(|&(regime, alpha)| {
                    let post = if regime == Regime::None {
                        pre
                    } else {
                        let adapted = adapt_task(learner, params, task, regime, alpha)?;
                        query_score(learner, &adapted, &task.query)?
                    };
                    Ok(TaskScore {
                        task_id: task.task_id.clone(),
                        pre,
                        post,
                        regime,
                        alpha,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(settings
        .iter()
        .enumerate()
        .map(|(k, &(regime, alpha))| AdaptationReport {
            regime,
            alpha,
            rows: per_task.iter().map(|scores| scores[k].clone()).collect(),
        })
        .collect())
}

pub fn adapt_eval(
    learner: &SeparationLearner,
    params: &ModelParams,
    tasks: &[SeparationTask],
    regime: Regime,
    alpha: f64,
) -> Result<AdaptationReport> {
    Ok(adapt_eval_many(learner, params, tasks, &[(regime, alpha)])?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub regime: Regime,
    pub alpha: f64,
    pub mean_sisnri: f64,
    pub std: f64,
}

/// Every alpha of [`SWEEP_ALPHAS`] under each adapting regime: 30 settings.
pub fn lr_sweep(
    learner: &SeparationLearner,
    params: &ModelParams,
    tasks: &[SeparationTask],
) -> Result<(Vec<SweepRow>, Vec<AdaptationReport>)> {
    let settings: Vec<(Regime, f64)> = Regime::ADAPTING
        .iter()
        .flat_map(|&r| SWEEP_ALPHAS.iter().map(move |&a| (r, a)))
        .collect();
    let reports = adapt_eval_many(learner, params, tasks, &settings)?;
    let rows = reports
        .iter()
        .map(|r| SweepRow {
            regime: r.regime,
            alpha: r.alpha,
            mean_sisnri: r.mean_post(),
            std: r.std_post(),
        })
        .collect();
    Ok((rows, reports))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["regime", "alpha", "mean_sisnri", "std"])?;
    for r in rows {
        w.write_record([r.regime.to_string(), r.alpha.to_string(), r.mean_sisnri.to_string(), r.std.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("sweep csv: {e}")))
        };
        out.push(SweepRow {
            regime: field(0).parse()?,
            alpha: num(1)?,
            mean_sisnri: num(2)?,
            std: num(3)?,
        });
    }
    Ok(out)
}
