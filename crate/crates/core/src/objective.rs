//! SI-SNR, utterance-level permutation-invariant loss, and SI-SNRi.
//!
//! SI-SNR projects the estimate onto the reference,
//! `s_target = (<ŝ, s> / ||s||²) s`, and reports
//! `10 log10((||s_target||² + ε) / (||ŝ - s_target||² + ε))`.
//! By default signals are used as given; [`SiSnrOptions::zero_mean`]
//! subtracts each signal's mean first.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::autograd::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const MAX_PIT_SOURCES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiSnrOptions {
    pub epsilon: f64,
    pub zero_mean: bool,
}

impl Default for SiSnrOptions {
    fn default() -> Self {
        SiSnrOptions {
            epsilon: DEFAULT_EPSILON,
            zero_mean: false,
        }
    }
}

/// Loss and the estimate-to-reference assignment that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    /// Negated mean SI-SNR in dB under the chosen assignment.
    pub value: f64,
    /// `permutation[i]` is the reference index matched to estimate `i`.
    pub permutation: Vec<usize>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            op: "si_snr",
            left: vec![a],
            right: vec![b],
        });
    }
    Ok(())
}

fn centered(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len().max(1) as f64;
    x.iter().map(|v| v - m).collect()
}

fn check_options(opts: &SiSnrOptions) -> Result<()> {
    if opts.epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    Ok(())
}

/// SI-SNR of `estimate` against `reference`, in dB.
pub fn si_snr(estimate: &[f64], reference: &[f64], opts: &SiSnrOptions) -> Result<f64> {
    check_lengths(estimate.len(), reference.len())?;
    check_options(opts)?;
    let (est, refr) = if opts.zero_mean {
        (centered(estimate), centered(reference))
    } else {
        (estimate.to_vec(), reference.to_vec())
    };
    let ref_power: f64 = refr.iter().map(|v| v * v).sum();
    if ref_power == 0.0 {
        return Err(Error::ZeroPower("reference"));
    }
    let coef = est.iter().zip(&refr).map(|(a, b)| a * b).sum::<f64>() / ref_power;
    let mut target_power = 0.0;
    let mut error_power = 0.0;
    for (e, r) in est.iter().zip(&refr) {
        let t = coef * r;
        target_power += t * t;
        error_power += (e - t) * (e - t);
    }
    Ok(10.0 * ((target_power + opts.epsilon) / (error_power + opts.epsilon)).log10())
}

/// `si_snr(estimate, reference) - si_snr(mixture, reference)`.
pub fn si_snri(estimate: &[f64], reference: &[f64], mixture: &[f64], opts: &SiSnrOptions) -> Result<f64> {
    Ok(si_snr(estimate, reference, opts)? - si_snr(mixture, reference, opts)?)
}

/// Differentiable SI-SNR of an estimate node against a constant reference.
pub fn si_snr_node(tape: &mut Tape, estimate: NodeId, reference: &[f64], opts: &SiSnrOptions) -> Result<NodeId> {
    check_options(opts)?;
    let shape = tape.value(estimate).shape().to_vec();
    check_lengths(tape.value(estimate).numel(), reference.len())?;
    let refr = if opts.zero_mean {
        centered(reference)
    } else {
        reference.to_vec()
    };
    let ref_power: f64 = refr.iter().map(|v| v * v).sum();
    if ref_power == 0.0 {
        return Err(Error::ZeroPower("reference"));
    }
    let est = if opts.zero_mean { tape.center(estimate) } else { estimate };
    let s = tape.constant(Tensor::new(shape, refr)?);
    let inner = tape.dot(est, s)?;
    let coef = tape.scale(inner, 1.0 / ref_power);
    let target = tape.mul_scalar(s, coef)?;
    let err = tape.sub(est, target)?;
    let tp = tape.dot(target, target)?;
    let ep = tape.dot(err, err)?;
    let num = tape.add_scalar(tp, opts.epsilon);
    let den = tape.add_scalar(ep, opts.epsilon);
    let ln_num = tape.ln(num)?;
    let ln_den = tape.ln(den)?;
    let ratio = tape.sub(ln_num, ln_den)?;
    Ok(tape.scale(ratio, 10.0 / std::f64::consts::LN_10))
}

fn check_pit(estimates: usize, references: usize) -> Result<()> {
    if estimates != references || estimates == 0 {
        return Err(Error::ShapeMismatch {
            op: "upit_loss",
            left: vec![estimates],
            right: vec![references],
        });
    }
    if estimates > MAX_PIT_SOURCES {
        return Err(Error::TooManySources(estimates));
    }
    Ok(())
}

/// Picks the assignment maximizing mean pairwise score.
/// `scores[i][j]` is the score of estimate `i` against reference `j`.
/// Permutations are visited in lexicographic order and only a strictly
/// better one replaces the incumbent, so ties go to the smallest.
pub fn best_permutation(scores: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let c = scores.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for perm in (0..c).permutations(c) {
        let mean = perm.iter().enumerate().map(|(i, &j)| scores[i][j]).sum::<f64>() / c as f64;
        if best.as_ref().is_none_or(|(_, b)| mean > *b) {
            best = Some((perm, mean));
        }
    }
    best.expect("at least one permutation")
}

/// Pairwise SI-SNR matrix `[estimate][reference]`.
pub fn pairwise_si_snr(estimates: &[&[f64]], references: &[&[f64]], opts: &SiSnrOptions) -> Result<Vec<Vec<f64>>> {
    estimates
        .iter()
        .map(|e| references.iter().map(|r| si_snr(e, r, opts)).collect())
        .collect()
}

/// Utterance-level PIT loss on plain signals.
pub fn upit_loss(estimates: &[&[f64]], references: &[&[f64]], opts: &SiSnrOptions) -> Result<LossValue> {
    check_pit(estimates.len(), references.len())?;
    let scores = pairwise_si_snr(estimates, references, opts)?;
    let (permutation, mean) = best_permutation(&scores);
    Ok(LossValue {
        value: -mean,
        permutation,
    })
}

/// Differentiable uPIT loss. The assignment is chosen on values; the
/// returned node only depends on the pairs of the chosen assignment.
pub fn upit_loss_node(
    tape: &mut Tape,
    estimates: &[NodeId],
    references: &[&[f64]],
    opts: &SiSnrOptions,
) -> Result<(NodeId, LossValue)> {
    check_pit(estimates.len(), references.len())?;
    let values: Vec<Vec<f64>> = estimates.iter().map(|&e| tape.value(e).data().to_vec()).collect();
    let views: Vec<&[f64]> = values.iter().map(Vec::as_slice).collect();
    let scores = pairwise_si_snr(&views, references, opts)?;
    let (permutation, _) = best_permutation(&scores);
    let mut total: Option<NodeId> = None;
    for (i, &j) in permutation.iter().enumerate() {
        let s = si_snr_node(tape, estimates[i], references[j], opts)?;
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    let loss = tape.scale(total.expect("nonempty"), -1.0 / estimates.len() as f64);
    let value = tape.value(loss).item();
    Ok((loss, LossValue { value, permutation }))
}

/// Mean SI-SNRi over sources after aligning estimates to references with
/// the uPIT assignment.
pub fn aligned_si_snri(
    estimates: &[&[f64]],
    references: &[&[f64]],
    mixture: &[f64],
    opts: &SiSnrOptions,
) -> Result<f64> {
    let loss = upit_loss(estimates, references, opts)?;
    let mut total = 0.0;
    for (i, &j) in loss.permutation.iter().enumerate() {
        total += si_snri(estimates[i], references[j], mixture, opts)?;
    }
    Ok(total / estimates.len() as f64)
}
