//! Central finite-difference gradient checking.

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::Result;

/// Compares the tape gradient of `f` at `point` with central differences of
/// step `step` and returns the largest relative error
/// `|analytic - numeric| / max(|analytic|, 1e-8)` over all coordinates.
///
/// `f` receives a fresh tape and the leaf holding the point, and must return
/// a scalar node.
pub fn finite_difference_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    let analytic = {
        let mut tape = Tape::new();
        let x = tape.param(point.clone());
        let root = f(&mut tape, x)?;
        tape.backward(root)?;
        tape.take_grad(x).unwrap_or_else(|| Tensor::zeros(point.shape()))
    };
    let eval = |p: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.param(p);
        let root = f(&mut tape, x)?;
        Ok(tape.value(root).item())
    };
    let mut worst = 0.0f64;
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1e-8));
    }
    Ok(worst)
}
