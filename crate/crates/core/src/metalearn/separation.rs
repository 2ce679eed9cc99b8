use rayon::prelude::*;

use super::Learner;
use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::objective::{upit_loss, upit_loss_node, SiSnrOptions};
use crate::tasnet::{BoundParams, ConvTasNet, ModelParams, Partition};

/// A mixture with its clean sources.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureExample {
    pub mixture: Vec<f64>,
    pub references: Vec<Vec<f64>>,
}

impl MixtureExample {
    pub fn new(mixture: Vec<f64>, references: Vec<Vec<f64>>) -> Self {
        MixtureExample { mixture, references }
    }
}

/// Conv-TasNet trained with the negative uPIT SI-SNR.
#[derive(Clone, Debug)]
pub struct SeparationLearner {
    pub model: ConvTasNet,
    pub opts: SiSnrOptions,
}

impl SeparationLearner {
    pub fn new(model: ConvTasNet) -> Self {
        SeparationLearner {
            model,
            opts: SiSnrOptions::default(),
        }
    }

    fn check(&self, examples: &[MixtureExample]) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::InvalidConfig("no examples".into()));
        }
        let c = self.model.config().sources;
        for ex in examples {
            if ex.references.len() != c {
                return Err(Error::InvalidConfig(format!(
                    "example has {} references, model separates {c}",
                    ex.references.len()
                )));
            }
        }
        Ok(())
    }

    fn example_loss_and_grad(
        &self,
        params: &ModelParams,
        ex: &MixtureExample,
        partition: Partition,
    ) -> Result<(f64, ModelParams)> {
        let mut tape = Tape::new();
        let bound = BoundParams::register(&mut tape, params, |g| partition.contains(g));
        let outs = self.model.forward(&mut tape, &bound, &ex.mixture)?;
        let refs: Vec<&[f64]> = ex.references.iter().map(Vec::as_slice).collect();
        let (loss, value) = upit_loss_node(&mut tape, &outs, &refs, &self.opts)?;
        tape.backward(loss)?;
        Ok((value.value, bound.gradients(&mut tape)))
    }
}

impl Learner for SeparationLearner {
    type Example = MixtureExample;

    fn loss(&self, params: &ModelParams, examples: &[MixtureExample]) -> Result<f64> {
        self.check(examples)?;
        let losses: Vec<f64> = examples
            .par_iter()
            .map(|ex| {
                let est = self.model.separate_signal(params, &ex.mixture)?;
                let est: Vec<&[f64]> = est.iter().map(Vec::as_slice).collect();
                let refs: Vec<&[f64]> = ex.references.iter().map(Vec::as_slice).collect();
                Ok(upit_loss(&est, &refs, &self.opts)?.value)
            })
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / examples.len() as f64)
    }

    fn loss_and_grad(
        &self,
        params: &ModelParams,
        examples: &[MixtureExample],
        partition: Partition,
    ) -> Result<(f64, ModelParams)> {
        self.check(examples)?;
        let per: Vec<(f64, ModelParams)> = examples
            .par_iter()
            .map(|ex| self.example_loss_and_grad(params, ex, partition))
            .collect::<Result<_>>()?;
        let n = examples.len() as f64;
        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        for (l, g) in &per {
            grad.add_assign(g)?;
            loss += l;
        }
        grad.scale(1.0 / n);
        Ok((loss / n, grad))
    }
}
