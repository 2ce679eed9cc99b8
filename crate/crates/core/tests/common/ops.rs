//! Finite-difference cases for every differentiable tape operation.

use metass::autograd::{finite_difference_check, ConvOptions, NodeId, Tape, Tensor};
use metass::objective::{si_snr_node, upit_loss_node, SiSnrOptions};
use metass::Result;

use super::{away_from_zero, random_tensor, rng, weighted_sum};

pub const SEEDS: u64 = 10;
pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-4;

type OpFn = Box<dyn Fn(&mut Tape, NodeId, u64) -> Result<NodeId>>;

pub struct OpCase {
    pub name: String,
    pub shape: Vec<usize>,
    /// Input is kept away from zero (kinked activations).
    pub kinked: bool,
    pub f: OpFn,
}

impl OpCase {
    /// Largest relative error over [`SEEDS`] random points.
    pub fn worst_error(&self) -> f64 {
        (0..SEEDS)
            .map(|seed| {
                let mut r = rng(seed);
                let point = if self.kinked {
                    away_from_zero(&mut r, &self.shape)
                } else {
                    random_tensor(&mut r, &self.shape)
                };
                finite_difference_check(|t, x| (self.f)(t, x, seed), &point, STEP).unwrap()
            })
            .fold(0.0, f64::max)
    }
}

fn case(
    name: impl Into<String>,
    shape: &[usize],
    kinked: bool,
    f: impl Fn(&mut Tape, NodeId, u64) -> Result<NodeId> + 'static,
) -> OpCase {
    OpCase {
        name: name.into(),
        shape: shape.to_vec(),
        kinked,
        f: Box::new(f),
    }
}

fn constant(tape: &mut Tape, seed: u64, shape: &[usize]) -> NodeId {
    tape.constant(random_tensor(&mut rng(seed + 1000), shape))
}

fn square_then_weigh(t: &mut Tape, y: NodeId, s: u64) -> Result<NodeId> {
    let y = t.mul(y, y)?;
    weighted_sum(t, y, s)
}

pub fn op_cases() -> Vec<OpCase> {
    let depthwise = ConvOptions {
        stride: 1,
        dilation: 2,
        groups: 4,
    };
    let mut v = vec![
        case("conv1d wrt input", &[3, 12], false, |t, x, s| {
            let w = constant(t, s, &[4, 3, 3]);
            let y = t.conv1d(x, w, 2)?;
            weighted_sum(t, y, s)
        }),
        case("conv1d wrt kernel", &[4, 3, 3], false, |t, w, s| {
            let x = constant(t, s, &[3, 12]);
            let y = t.conv1d(x, w, 2)?;
            weighted_sum(t, y, s)
        }),
        case("depthwise wrt input", &[4, 11], false, move |t, x, s| {
            let w = constant(t, s, &[4, 1, 3]);
            let y = t.conv1d_with(x, w, depthwise)?;
            weighted_sum(t, y, s)
        }),
        case("depthwise wrt kernel", &[4, 1, 3], false, move |t, w, s| {
            let x = constant(t, s, &[4, 11]);
            let y = t.conv1d_with(x, w, depthwise)?;
            weighted_sum(t, y, s)
        }),
        case("conv1d_transpose wrt input", &[3, 5], false, |t, x, s| {
            let w = constant(t, s, &[3, 2, 4]);
            let y = t.conv1d_transpose(x, w, 2)?;
            weighted_sum(t, y, s)
        }),
        case("conv1d_transpose wrt kernel", &[3, 2, 4], false, |t, w, s| {
            let x = constant(t, s, &[3, 5]);
            let y = t.conv1d_transpose(x, w, 2)?;
            weighted_sum(t, y, s)
        }),
        case("prelu wrt input", &[3, 4], true, |t, x, s| {
            let a = constant(t, s, &[3]);
            let y = t.prelu(x, a)?;
            weighted_sum(t, y, s)
        }),
        case("prelu wrt slope", &[3], false, |t, a, s| {
            let x = t.constant(away_from_zero(&mut rng(s + 7), &[3, 4]));
            let y = t.prelu(x, a)?;
            weighted_sum(t, y, s)
        }),
        case("sigmoid", &[3, 4], false, |t, x, s| {
            let y = t.sigmoid(x);
            weighted_sum(t, y, s)
        }),
        case("relu", &[3, 4], true, |t, x, s| {
            let y = t.relu(x);
            weighted_sum(t, y, s)
        }),
        case("conv1d -> prelu -> sum", &[2, 10], false, |t, x, s| {
            let w = constant(t, s, &[3, 2, 3]);
            let a = t.constant(Tensor::from_vec(vec![0.25, 0.1, -0.3]));
            let y = t.conv1d(x, w, 1)?;
            let z = t.prelu(y, a)?;
            Ok(t.sum(z))
        }),
        case("gLN wrt input", &[4, 5], false, |t, x, s| {
            let g = constant(t, s, &[4]);
            let b = constant(t, s + 1, &[4]);
            let y = t.global_layer_norm(x, g, b, 1e-8)?;
            weighted_sum(t, y, s)
        }),
        case("gLN wrt gain", &[4], false, |t, g, s| {
            let x = constant(t, s, &[4, 5]);
            let b = constant(t, s + 1, &[4]);
            let y = t.global_layer_norm(x, g, b, 1e-8)?;
            weighted_sum(t, y, s)
        }),
        case("gLN wrt bias", &[4], false, |t, b, s| {
            let x = constant(t, s, &[4, 5]);
            let g = constant(t, s + 1, &[4]);
            let y = t.global_layer_norm(x, g, b, 1e-8)?;
            weighted_sum(t, y, s)
        }),
        case("add", &[3, 4], false, |t, x, s| {
            let c = constant(t, s, &[3, 4]);
            let y = t.add(x, c)?;
            square_then_weigh(t, y, s)
        }),
        case("sub", &[3, 4], false, |t, x, s| {
            let c = constant(t, s, &[3, 4]);
            let y = t.sub(c, x)?;
            let y = t.mul(y, x)?;
            weighted_sum(t, y, s)
        }),
        case("mul", &[3, 4], false, |t, x, s| {
            let c = constant(t, s, &[3, 4]);
            let y = t.mul(x, c)?;
            let y = t.mul(y, x)?;
            weighted_sum(t, y, s)
        }),
        case("scale / add_scalar", &[3, 4], false, |t, x, s| {
            let y = t.scale(x, -1.7);
            let y = t.add_scalar(y, 0.3);
            square_then_weigh(t, y, s)
        }),
        case("mul_scalar wrt tensor", &[3, 4], false, |t, x, s| {
            let k = t.constant(Tensor::scalar(0.7));
            let y = t.mul_scalar(x, k)?;
            let y = t.mul(y, x)?;
            weighted_sum(t, y, s)
        }),
        case("mul_scalar wrt scalar", &[], false, |t, k, s| {
            let x = constant(t, s, &[3, 4]);
            let y = t.mul_scalar(x, k)?;
            square_then_weigh(t, y, s)
        }),
        case("dot", &[3, 4], false, |t, x, s| {
            let c = constant(t, s, &[3, 4]);
            let d = t.dot(x, c)?;
            t.mul(d, d)
        }),
        case("sum / mean", &[3, 4], false, |t, x, _| {
            let y = t.mul(x, x)?;
            let a = t.sum(y);
            let b = t.mean(x);
            t.mul(a, b)
        }),
        case("ln", &[3, 4], false, |t, x, s| {
            let y = t.mul(x, x)?;
            let y = t.add_scalar(y, 0.5);
            let y = t.ln(y)?;
            weighted_sum(t, y, s)
        }),
        case("center", &[1, 9], false, |t, x, s| {
            let y = t.center(x);
            square_then_weigh(t, y, s)
        }),
        case("slice_rows", &[5, 3], false, |t, x, s| {
            let y = t.slice_rows(x, 1, 4)?;
            square_then_weigh(t, y, s)
        }),
        case("window trim", &[2, 9], false, |t, x, s| {
            let y = t.window(x, 2, 5)?;
            square_then_weigh(t, y, s)
        }),
        case("window pad", &[2, 4], false, |t, x, s| {
            let y = t.window(x, -1, 7)?;
            square_then_weigh(t, y, s)
        }),
        case("pad_cols", &[2, 4], false, |t, x, s| {
            let y = t.pad_cols(x, 2, 1)?;
            square_then_weigh(t, y, s)
        }),
    ];
    for zero_mean in [false, true] {
        let o = SiSnrOptions {
            zero_mean,
            ..SiSnrOptions::default()
        };
        v.push(case(format!("si_snr (zero_mean={zero_mean})"), &[1, 16], false, move |t, x, s| {
            let r = random_tensor(&mut rng(s + 50), &[16]).into_data();
            si_snr_node(t, x, &r, &o)
        }));
    }
    v.push(case("upit", &[2, 16], false, |t, x, s| {
        let mut g = rng(s + 60);
        let r1 = random_tensor(&mut g, &[16]).into_data();
        let r2 = random_tensor(&mut g, &[16]).into_data();
        let a = t.slice_rows(x, 0, 1)?;
        let b = t.slice_rows(x, 1, 2)?;
        Ok(upit_loss_node(t, &[a, b], &[&r1, &r2], &SiSnrOptions::default())?.0)
    }));
    v
}
