use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasnet::{ModelParams, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidConfig(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Adam state: first and second moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Option<ModelParams>,
    v: Option<ModelParams>,
    t: i32,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: None,
            v: None,
            t: 0,
        }
    }
}

/// Full-model update rule used for pretraining.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub lr: f64,
    adam: Option<Adam>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer { lr, adam: None }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer {
            lr,
            adam: Some(Adam::default()),
        }
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::sgd(lr),
            OptimizerKind::Adam => Optimizer::adam(lr),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams) -> Result<()> {
        let Some(adam) = self.adam.as_mut() else {
            return params.axpy(-self.lr, grad, Partition::WholeModel);
        };
        let m = adam.m.get_or_insert_with(|| grad.zeros_like());
        let v = adam.v.get_or_insert_with(|| grad.zeros_like());
        adam.t += 1;
        let c1 = 1.0 - adam.beta1.powi(adam.t);
        let c2 = 1.0 - adam.beta2.powi(adam.t);
        let (b1, b2, eps, lr) = (adam.beta1, adam.beta2, adam.eps, self.lr);
        let moments = m.values_mut().zip(v.values_mut());
        for ((p, g), (m, v)) in params.values_mut().zip(grad.iter()).zip(moments) {
            let slots = p.data_mut().iter_mut().zip(g.value.data());
            for ((p, &g), (m, v)) in slots.zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut())) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
