//! MAML / ANIL meta-training, one-shot fine-tuning and the multi-task
//! baseline step.
//!
//! Everything here is written against the [`Learner`] trait, so the same
//! loops drive the separation model and the scalar quadratic probe used to
//! pin the meta-gradient down in closed form.

mod optim;
mod probe;
mod separation;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasnet::{ModelParams, Partition};

pub use optim::{Adam, Optimizer, OptimizerKind};
pub use probe::QuadraticProbe;
pub use separation::{MixtureExample, SeparationLearner};

/// Default parameter-count ceiling for the finite-difference meta-gradient.
pub const EXACT_PARAM_LIMIT: usize = 2_000;

/// A model plus a per-example loss. Losses are averaged over the examples
/// passed in one call.
pub trait Learner: Sync {
    type Example: Sync;

    fn loss(&self, params: &ModelParams, examples: &[Self::Example]) -> Result<f64>;

    /// Mean loss and its gradient. Tensors outside `partition` get zero
    /// gradient.
    fn loss_and_grad(
        &self,
        params: &ModelParams,
        examples: &[Self::Example],
        partition: Partition,
    ) -> Result<(f64, ModelParams)>;
}

/// One meta-task: adaptation data and evaluation data.
#[derive(Clone, Debug, PartialEq)]
pub struct Task<E> {
    pub id: String,
    pub support: Vec<E>,
    pub query: Vec<E>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaGradMode {
    /// Query gradient at the adapted parameters, applied to the base.
    FirstOrder,
    /// Central differences of the meta-loss; tiny models only.
    FiniteDifferenceExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Inner-loop and fine-tuning learning rate.
    pub alpha: f64,
    /// Outer learning rate.
    pub beta: f64,
    /// Tasks per outer step.
    pub batch_size: usize,
    pub inner_steps: usize,
    pub partition: Partition,
    pub meta_grad_mode: MetaGradMode,
    /// Step for [`MetaGradMode::FiniteDifferenceExact`].
    pub fd_step: f64,
    pub fd_param_limit: usize,
    /// Lifts the one-sample restriction of [`finetune`].
    pub allow_multi_shot: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            alpha: 0.01,
            beta: 1e-4,
            batch_size: 4,
            inner_steps: 1,
            partition: Partition::WholeModel,
            meta_grad_mode: MetaGradMode::FirstOrder,
            fd_step: 1e-5,
            fd_param_limit: EXACT_PARAM_LIMIT,
            allow_multi_shot: false,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        // alpha = 0 and beta = 0 are accepted as degenerate no-op settings.
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rates must be finite and nonnegative (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.batch_size == 0 || self.inner_steps == 0 {
            return Err(Error::InvalidConfig("batch_size and inner_steps must be at least 1".into()));
        }
        if self.fd_step <= 0.0 {
            return Err(Error::InvalidConfig("fd_step must be positive".into()));
        }
        Ok(())
    }
}

/// Result of adapting a base parameter set to one task.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedParams {
    pub params: ModelParams,
    /// Support loss before each inner step.
    pub inner_losses: Vec<f64>,
}

fn ensure_finite(loss: f64, grad: &ModelParams, context: impl FnOnce() -> String) -> Result<()> {
    if loss.is_finite() && grad.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{}: loss {loss}", context())))
    }
}

/// `inner_steps` gradient-descent steps on the support loss, touching only
/// the tensors in `cfg.partition`. The base parameters are not modified.
pub fn inner_adapt<L: Learner>(
    learner: &L,
    params: &ModelParams,
    support: &[L::Example],
    cfg: &MetaConfig,
) -> Result<AdaptedParams> {
    cfg.validate()?;
    if support.is_empty() {
        return Err(Error::InvalidConfig("support set is empty".into()));
    }
    let mut adapted = params.clone();
    let mut inner_losses = Vec::with_capacity(cfg.inner_steps);
    for step in 0..cfg.inner_steps {
        let (loss, grad) = learner.loss_and_grad(&adapted, support, cfg.partition)?;
        ensure_finite(loss, &grad, || format!("inner step {step}"))?;
        adapted.axpy(-cfg.alpha, &grad, cfg.partition)?;
        inner_losses.push(loss);
    }
    Ok(AdaptedParams {
        params: adapted,
        inner_losses,
    })
}

fn check_tasks<E>(tasks: &[Task<E>]) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("empty task batch".into()));
    }
    if let Some(t) = tasks.iter().find(|t| t.support.is_empty() || t.query.is_empty()) {
        return Err(Error::InvalidConfig(format!("task {} has an empty support or query set", t.id)));
    }
    Ok(())
}

/// Sum over tasks of the query loss at the task-adapted parameters.
pub fn meta_loss<L: Learner>(
    learner: &L,
    params: &ModelParams,
    tasks: &[Task<L::Example>],
    cfg: &MetaConfig,
) -> Result<(f64, Vec<AdaptedParams>)>
where
    L::Example: Send,
{
    check_tasks(tasks)?;
    let per_task: Vec<(f64, AdaptedParams)> = tasks
        .par_iter()
        .map(|t| {
            let adapted = inner_adapt(learner, params, &t.support, cfg)?;
            let q = learner.loss(&adapted.params, &t.query)?;
            Ok((q, adapted))
        })
        .collect::<Result<_>>()?;
    let total = per_task.iter().map(|(q, _)| q).sum();
    Ok((total, per_task.into_iter().map(|(_, a)| a).collect()))
}

/// Meta-gradient and meta-loss at `params`.
pub fn meta_gradient<L: Learner>(
    learner: &L,
    params: &ModelParams,
    tasks: &[Task<L::Example>],
    cfg: &MetaConfig,
) -> Result<(ModelParams, f64)>
where
    L::Example: Send,
{
    check_tasks(tasks)?;
    match cfg.meta_grad_mode {
        MetaGradMode::FirstOrder => {
            let per_task: Vec<(f64, ModelParams)> = tasks
                .par_iter()
                .map(|t| {
                    let adapted = inner_adapt(learner, params, &t.support, cfg)?;
                    let (q, g) = learner.loss_and_grad(&adapted.params, &t.query, Partition::WholeModel)?;
                    ensure_finite(q, &g, || format!("query loss of task {}", t.id))?;
                    Ok((q, g))
                })
                .collect::<Result<_>>()?;
            // fixed reduction order: task index
            let mut total = params.zeros_like();
            let mut loss = 0.0;
            for (q, g) in &per_task {
                total.add_assign(g)?;
                loss += q;
            }
            Ok((total, loss))
        }
        MetaGradMode::FiniteDifferenceExact => {
            let count = params.scalar_count();
            if count > cfg.fd_param_limit {
                return Err(Error::TooManyParams {
                    count,
                    limit: cfg.fd_param_limit,
                });
            }
            let h = cfg.fd_step;
            let mut grad = params.zeros_like();
            let mut probe = params.clone();
            for i in 0..count {
                let x = params.get_scalar(i);
                probe.set_scalar(i, x + h);
                let plus = meta_loss(learner, &probe, tasks, cfg)?.0;
                probe.set_scalar(i, x - h);
                let minus = meta_loss(learner, &probe, tasks, cfg)?.0;
                probe.set_scalar(i, x);
                grad.set_scalar(i, (plus - minus) / (2.0 * h));
            }
            let loss = meta_loss(learner, params, tasks, cfg)?.0;
            Ok((grad, loss))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaStep {
    pub params: ModelParams,
    /// Meta-loss at the parameters before the update.
    pub meta_loss: f64,
}

/// One outer update, `θ ← θ - β g`, with `g` summed (not averaged) over tasks.
pub fn meta_step<L: Learner>(
    learner: &L,
    params: &ModelParams,
    tasks: &[Task<L::Example>],
    cfg: &MetaConfig,
) -> Result<MetaStep>
where
    L::Example: Send,
{
    cfg.validate()?;
    let (grad, meta_loss) = meta_gradient(learner, params, tasks, cfg)?;
    let mut updated = params.clone();
    updated.axpy(-cfg.beta, &grad, Partition::WholeModel)?;
    Ok(MetaStep {
        params: updated,
        meta_loss,
    })
}

/// One-shot adaptation to a target task. Same update as [`inner_adapt`];
/// refuses more than one sample unless `cfg.allow_multi_shot` is set.
pub fn finetune<L: Learner>(
    learner: &L,
    params: &ModelParams,
    sample: &[L::Example],
    cfg: &MetaConfig,
) -> Result<ModelParams> {
    if sample.len() != 1 && !cfg.allow_multi_shot {
        return Err(Error::InvalidConfig(format!(
            "one-shot fine-tuning expects exactly one sample, got {}",
            sample.len()
        )));
    }
    Ok(inner_adapt(learner, params, sample, cfg)?.params)
}

/// One plain gradient-descent step of the mean loss over a pooled minibatch,
/// updating every tensor. Returns the updated parameters and the loss before
/// the step.
pub fn multitask_step<L: Learner>(
    learner: &L,
    params: &ModelParams,
    minibatch: &[L::Example],
    lr: f64,
) -> Result<(ModelParams, f64)> {
    let mut opt = Optimizer::sgd(lr);
    let mut updated = params.clone();
    let loss = multitask_step_with(learner, &mut updated, minibatch, &mut opt)?;
    Ok((updated, loss))
}

/// [`multitask_step`] with a caller-held optimizer, updating in place.
pub fn multitask_step_with<L: Learner>(
    learner: &L,
    params: &mut ModelParams,
    minibatch: &[L::Example],
    optimizer: &mut Optimizer,
) -> Result<f64> {
    if minibatch.is_empty() {
        return Err(Error::InvalidConfig("empty minibatch".into()));
    }
    let (loss, grad) = learner.loss_and_grad(params, minibatch, Partition::WholeModel)?;
    ensure_finite(loss, &grad, || "multitask step".to_string())?;
    optimizer.step(params, &grad)?;
    Ok(loss)
}
