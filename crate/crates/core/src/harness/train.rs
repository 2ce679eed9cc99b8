use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metalearn::{meta_loss, meta_step, multitask_step_with, Learner, MetaConfig, Optimizer, OptimizerKind, Task};
use crate::tasnet::ModelParams;

/// One row of a per-epoch loss CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
}

pub fn write_loss_csv(path: &Path, rows: &[LossRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Epoch 0 is the evaluation of the initial parameters.
    pub history: Vec<LossRow>,
    /// Lowest selection loss among epochs >= 1 (the initial parameters when
    /// no epoch ran).
    pub best: ModelParams,
    pub best_epoch: usize,
    /// Parameters after `half_epoch` epochs, when requested.
    pub half: Option<ModelParams>,
    pub final_params: ModelParams,
}

struct Tracker {
    history: Vec<LossRow>,
    best: Option<(f64, usize, ModelParams)>,
    half_epoch: Option<usize>,
    half: Option<ModelParams>,
}

impl Tracker {
    fn new(half_epoch: Option<usize>) -> Self {
        Tracker {
            history: Vec::new(),
            best: None,
            half_epoch,
            half: None,
        }
    }

    fn record(&mut self, epoch: usize, split: &str, loss: f64) {
        self.history.push(LossRow {
            epoch,
            split: split.to_string(),
            loss,
        });
    }

    fn observe(&mut self, epoch: usize, selection_loss: f64, params: &ModelParams) {
        if self.half_epoch == Some(epoch) {
            self.half = Some(params.clone());
        }
        if epoch == 0 {
            return;
        }
        if self.best.as_ref().is_none_or(|(l, _, _)| selection_loss < *l) {
            self.best = Some((selection_loss, epoch, params.clone()));
        }
    }

    fn finish(self, params: ModelParams) -> TrainOutcome {
        let (best_epoch, best) = match self.best {
            Some((_, e, p)) => (e, p),
            None => (0, params.clone()),
        };
        TrainOutcome {
            history: self.history,
            best,
            best_epoch,
            half: self.half,
            final_params: params,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MultitaskSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub half_epoch: Option<usize>,
    pub seed: u64,
}

/// Pooled-minibatch training. Each epoch visits every training example once
/// in a seeded order; train and dev losses are evaluated after each epoch.
/// Model selection uses the dev loss, or the train loss when `dev` is empty.
pub fn train_multitask<L: Learner>(
    learner: &L,
    init: &ModelParams,
    train: &[L::Example],
    dev: &[L::Example],
    s: &MultitaskSettings,
) -> Result<TrainOutcome>
where
    L::Example: Clone,
{
    if train.is_empty() {
        return Err(Error::InvalidConfig("no training examples".into()));
    }
    if s.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut opt = Optimizer::new(s.optimizer, s.lr);
    let mut params = init.clone();
    let mut tracker = Tracker::new(s.half_epoch);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let evaluate = |params: &ModelParams, tracker: &mut Tracker, epoch: usize| -> Result<()> {
        let tl = learner.loss(params, train)?;
        tracker.record(epoch, "train", tl);
        let sel = if dev.is_empty() {
            tl
        } else {
            let dl = learner.loss(params, dev)?;
            tracker.record(epoch, "dev", dl);
            dl
        };
        info!("epoch {epoch}: train {tl:.4} selection {sel:.4}");
        tracker.observe(epoch, sel, params);
        Ok(())
    };

    evaluate(&params, &mut tracker, 0)?;
    for epoch in 1..=s.epochs {
        order.shuffle(&mut rng);
        for (step, chunk) in order.chunks(s.batch_size).enumerate() {
            let batch: Vec<L::Example> = chunk.iter().map(|&i| train[i].clone()).collect();
            multitask_step_with(learner, &mut params, &batch, &mut opt).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch} step {step}: {m}")),
                e => e,
            })?;
        }
        evaluate(&params, &mut tracker, epoch)?;
    }
    Ok(tracker.finish(params))
}

/// Repeated [`meta_step`]s over shuffled task batches. The per-epoch train
/// value is the mean pre-update meta-loss per task; the dev value is the
/// meta-loss per dev task after the epoch.
pub fn train_meta<L: Learner>(
    learner: &L,
    init: &ModelParams,
    train: &[Task<L::Example>],
    dev: &[Task<L::Example>],
    cfg: &MetaConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainOutcome>
where
    L::Example: Clone + Send,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("no training tasks".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init.clone();
    let mut tracker = Tracker::new(None);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let dev_loss = |p: &ModelParams| -> Result<Option<f64>> {
        if dev.is_empty() {
            return Ok(None);
        }
        Ok(Some(meta_loss(learner, p, dev, cfg)?.0 / dev.len() as f64))
    };

    let d0 = dev_loss(&params)?;
    if let Some(d) = d0 {
        tracker.record(0, "dev", d);
    }
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Task<L::Example>> = chunk.iter().map(|&i| train[i].clone()).collect();
            let out = meta_step(learner, &params, &batch, cfg).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch} step {step}: {m}")),
                e => e,
            })?;
            total += out.meta_loss;
            params = out.params;
        }
        let tl = total / train.len() as f64;
        tracker.record(epoch, "train", tl);
        let sel = match dev_loss(&params)? {
            Some(d) => {
                tracker.record(epoch, "dev", d);
                d
            }
            None => tl,
        };
        info!("meta epoch {epoch}: train {tl:.4} selection {sel:.4}");
        tracker.observe(epoch, sel, &params);
    }
    Ok(tracker.finish(params))
}
