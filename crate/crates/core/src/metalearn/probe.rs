use super::Learner;
use crate::autograd::Tensor;
use crate::error::Result;
use crate::tasnet::{Group, ModelParams, Partition};

/// Scalar quadratic `½(θ - t)²` with one parameter and one target per
/// example. Used to check the meta-learning loops against closed forms.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticProbe;

const PATH: &str = "separator.theta";

impl QuadraticProbe {
    pub fn params(theta: f64) -> ModelParams {
        let mut p = ModelParams::new();
        p.push(PATH, Group::Separator, Tensor::from_vec(vec![theta]));
        p
    }

    pub fn theta(params: &ModelParams) -> f64 {
        params.get(PATH).expect("probe parameter").data()[0]
    }
}

impl Learner for QuadraticProbe {
    type Example = f64;

    fn loss(&self, params: &ModelParams, targets: &[f64]) -> Result<f64> {
        let th = Self::theta(params);
        Ok(targets.iter().map(|t| 0.5 * (th - t).powi(2)).sum::<f64>() / targets.len() as f64)
    }

    fn loss_and_grad(&self, params: &ModelParams, targets: &[f64], partition: Partition) -> Result<(f64, ModelParams)> {
        let th = Self::theta(params);
        let mut grad = params.zeros_like();
        if partition.contains(Group::Separator) {
            let g = targets.iter().map(|t| th - t).sum::<f64>() / targets.len() as f64;
            grad.set_scalar(0, g);
        }
        Ok((self.loss(params, targets)?, grad))
    }
}
