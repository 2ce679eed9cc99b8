use super::kernels::{self, ConvGeometry};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearity. `PRelu` carries its slope tensor, which holds
/// either one shared value or one value per channel (leading dimension).
#[derive(Clone, Copy, Debug)]
pub enum Activation {
    PRelu(NodeId),
    Sigmoid,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvOptions {
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl Default for ConvOptions {
    fn default() -> Self {
        ConvOptions {
            stride: 1,
            dilation: 1,
            groups: 1,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d {
        input: NodeId,
        kernel: NodeId,
        geom: ConvGeometry,
    },
    ConvTranspose1d {
        input: NodeId,
        kernel: NodeId,
        stride: usize,
    },
    AddBias {
        input: NodeId,
        bias: NodeId,
    },
    PRelu {
        input: NodeId,
        slope: NodeId,
    },
    Sigmoid(NodeId),
    Relu(NodeId),
    GlobalLayerNorm {
        input: NodeId,
        gain: NodeId,
        bias: NodeId,
        normalized: Vec<f64>,
        inv_std: f64,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    MulScalar {
        input: NodeId,
        scalar: NodeId,
    },
    Dot(NodeId, NodeId),
    Sum(NodeId),
    Ln(NodeId),
    Center(NodeId),
    SliceRows {
        input: NodeId,
        start: usize,
    },
    Window {
        input: NodeId,
        offset: isize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
    grad: Option<Tensor>,
}

/// Ordered record of operations. Node ids are issued in execution order, so
/// every operation's inputs precede it and a reverse sweep is a valid
/// topological traversal.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn channels_of(t: &Tensor) -> usize {
    t.shape().first().copied().unwrap_or(1)
}

fn need_2d(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2().ok_or_else(|| Error::ShapeMismatch {
        op,
        left: t.shape().to_vec(),
        right: vec![0, 0],
    })
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Gradient accumulated into a leaf by the last [`Tape::backward`].
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, id: NodeId) -> Option<Tensor> {
        self.nodes[id.0].grad.take()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Valid-mode 1-D convolution. `input` is `[C_in, T]`, `kernel` is `[C_out, C_in, L]`.
    pub fn conv1d(&mut self, input: NodeId, kernel: NodeId, stride: usize) -> Result<NodeId> {
        self.conv1d_with(
            input,
            kernel,
            ConvOptions {
                stride,
                ..ConvOptions::default()
            },
        )
    }

    /// Grouped, dilated variant. `kernel` is `[C_out, C_in / groups, L]`.
    pub fn conv1d_with(&mut self, input: NodeId, kernel: NodeId, opts: ConvOptions) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(kernel);
        let (c_in, t_in) = need_2d("conv1d", x)?;
        let mismatch = || Error::ShapeMismatch {
            op: "conv1d",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        };
        let &[c_out, w_in, len] = w.shape() else {
            return Err(mismatch());
        };
        if opts.stride == 0 || opts.dilation == 0 || opts.groups == 0 || len == 0 {
            return Err(Error::InvalidConfig(format!("conv1d options {opts:?}")));
        }
        if c_in % opts.groups != 0 || c_out % opts.groups != 0 || w_in != c_in / opts.groups {
            return Err(mismatch());
        }
        let geom = ConvGeometry {
            c_in,
            c_out,
            kernel: len,
            stride: opts.stride,
            dilation: opts.dilation,
            groups: opts.groups,
        };
        if t_in < geom.span() {
            return Err(Error::TooShort {
                required: geom.span(),
                got: t_in,
            });
        }
        let t_out = geom.out_len(t_in);
        let out = kernels::conv1d_forward(x.data(), t_in, w.data(), &geom);
        let value = Tensor::new(vec![c_out, t_out], out)?;
        Ok(self.push(value, Op::Conv1d { input, kernel, geom }, &[input, kernel]))
    }

    /// Transposed convolution. `input` is `[C_in, T']`, `kernel` is `[C_in, C_out, L]`;
    /// the output is `[C_out, (T' - 1) * stride + L]`.
    pub fn conv1d_transpose(&mut self, input: NodeId, kernel: NodeId, stride: usize) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(kernel);
        let (c_in, t_in) = need_2d("conv1d_transpose", x)?;
        let mismatch = || Error::ShapeMismatch {
            op: "conv1d_transpose",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        };
        let &[w_in, c_out, len] = w.shape() else {
            return Err(mismatch());
        };
        if w_in != c_in || t_in == 0 || len == 0 {
            return Err(mismatch());
        }
        if stride == 0 {
            return Err(Error::InvalidConfig("conv1d_transpose stride 0".into()));
        }
        let out = kernels::conv_transpose1d_forward(x.data(), c_in, t_in, w.data(), c_out, len, stride);
        let value = Tensor::new(vec![c_out, (t_in - 1) * stride + len], out)?;
        Ok(self.push(value, Op::ConvTranspose1d { input, kernel, stride }, &[input, kernel]))
    }

    /// Adds `bias[c]` to every entry of row `c`.
    pub fn add_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let b = self.value(bias);
        let (rows, cols) = need_2d("add_bias", x)?;
        if b.numel() != rows {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                left: x.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let mut out = x.data().to_vec();
        for (r, bv) in b.data().iter().enumerate() {
            out[r * cols..(r + 1) * cols].iter_mut().for_each(|v| *v += bv);
        }
        let value = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.push(value, Op::AddBias { input, bias }, &[input, bias]))
    }

    pub fn activation(&mut self, input: NodeId, kind: Activation) -> Result<NodeId> {
        match kind {
            Activation::PRelu(slope) => self.prelu(input, slope),
            Activation::Sigmoid => Ok(self.sigmoid(input)),
            Activation::Relu => Ok(self.relu(input)),
        }
    }

    pub fn prelu(&mut self, input: NodeId, slope: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let a = self.value(slope);
        let channels = channels_of(x);
        if a.numel() != 1 && a.numel() != channels {
            return Err(Error::ShapeMismatch {
                op: "prelu",
                left: x.shape().to_vec(),
                right: a.shape().to_vec(),
            });
        }
        let per = x.numel() / channels.max(1);
        let out = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let av = if a.numel() == 1 { a.data()[0] } else { a.data()[i / per] };
                if v > 0.0 {
                    v
                } else {
                    av * v
                }
            })
            .collect();
        let value = Tensor::new(x.shape().to_vec(), out)?;
        Ok(self.push(value, Op::PRelu { input, slope }, &[input, slope]))
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let out = x
            .data()
            .iter()
            .map(|&v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        let value = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        self.push(value, Op::Sigmoid(input), &[input])
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let out = x.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        self.push(value, Op::Relu(input), &[input])
    }

    /// Global layer norm over all `D x T'` entries with per-channel gain and bias.
    pub fn global_layer_norm(&mut self, input: NodeId, gain: NodeId, bias: NodeId, epsilon: f64) -> Result<NodeId> {
        if epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!("gLN epsilon must be positive, got {epsilon}")));
        }
        let x = self.value(input);
        let (rows, cols) = need_2d("global_layer_norm", x)?;
        for p in [gain, bias] {
            if self.value(p).numel() != rows {
                return Err(Error::ShapeMismatch {
                    op: "global_layer_norm",
                    left: x.shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
        }
        let n = x.numel() as f64;
        let mean = x.data().iter().sum::<f64>() / n;
        let var = x.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + epsilon).sqrt();
        let normalized: Vec<f64> = x.data().iter().map(|v| (v - mean) * inv_std).collect();
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut out = Vec::with_capacity(normalized.len());
        for r in 0..rows {
            out.extend(normalized[r * cols..(r + 1) * cols].iter().map(|v| g[r] * v + b[r]));
        }
        let value = Tensor::new(vec![rows, cols], out)?;
        Ok(self.push(
            value,
            Op::GlobalLayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            },
            &[input, gain, bias],
        ))
    }

    fn zip_with(&mut self, op: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(op, a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let out = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.shape().to_vec(), out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("add", a, b, |p, q| p + q)?;
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("sub", a, b, |p, q| p - q)?;
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_with("mul", a, b, |p, q| p * q)?;
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let x = self.value(input);
        let v = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * factor).collect()).expect("same shape");
        self.push(v, Op::Scale(input, factor), &[input])
    }

    pub fn add_scalar(&mut self, input: NodeId, c: f64) -> NodeId {
        let x = self.value(input);
        let v = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v + c).collect()).expect("same shape");
        self.push(v, Op::AddScalar(input), &[input])
    }

    /// `input * scalar` where `scalar` is a one-element node.
    pub fn mul_scalar(&mut self, input: NodeId, scalar: NodeId) -> Result<NodeId> {
        let s = self.value(scalar);
        if !s.is_scalar() {
            return Err(Error::ShapeMismatch {
                op: "mul_scalar",
                left: self.value(input).shape().to_vec(),
                right: s.shape().to_vec(),
            });
        }
        let sv = s.item();
        let x = self.value(input);
        let v = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * sv).collect())?;
        Ok(self.push(v, Op::MulScalar { input, scalar }, &[input, scalar]))
    }

    /// Inner product over all entries; both operands must share a shape.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("dot", a, b)?;
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(Tensor::scalar(v), Op::Dot(a, b), &[a, b]))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input).data().iter().sum();
        self.push(Tensor::scalar(v), Op::Sum(input), &[input])
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let n = self.value(input).numel() as f64;
        let s = self.sum(input);
        self.scale(s, 1.0 / n)
    }

    /// Natural log; inputs must be positive.
    pub fn ln(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        if x.data().iter().any(|&v| v <= 0.0) {
            return Err(Error::NonFinite("ln of a non-positive value".into()));
        }
        let v = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v.ln()).collect())?;
        Ok(self.push(v, Op::Ln(input), &[input]))
    }

    /// Subtracts the mean over all entries.
    pub fn center(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let mean = x.data().iter().sum::<f64>() / x.numel() as f64;
        let v = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v - mean).collect()).expect("same shape");
        self.push(v, Op::Center(input), &[input])
    }

    /// Rows `start..end` of a 2-D tensor.
    pub fn slice_rows(&mut self, input: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let x = self.value(input);
        let (rows, cols) = need_2d("slice_rows", x)?;
        if start >= end || end > rows {
            return Err(Error::ShapeMismatch {
                op: "slice_rows",
                left: x.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let v = Tensor::new(vec![end - start, cols], x.data()[start * cols..end * cols].to_vec())?;
        Ok(self.push(v, Op::SliceRows { input, start }, &[input]))
    }

    /// Column window of length `len` starting at `offset` (which may be
    /// negative); positions outside the input read as zero. Covers both
    /// trimming and zero padding along time.
    pub fn window(&mut self, input: NodeId, offset: isize, len: usize) -> Result<NodeId> {
        let x = self.value(input);
        let (rows, cols) = need_2d("window", x)?;
        let mut out = vec![0.0; rows * len];
        for r in 0..rows {
            for t in 0..len {
                let src = t as isize + offset;
                if src >= 0 && (src as usize) < cols {
                    out[r * len + t] = x.data()[r * cols + src as usize];
                }
            }
        }
        let v = Tensor::new(vec![rows, len], out)?;
        Ok(self.push(v, Op::Window { input, offset }, &[input]))
    }

    /// Zero padding of `left`/`right` columns.
    pub fn pad_cols(&mut self, input: NodeId, left: usize, right: usize) -> Result<NodeId> {
        let cols = self.value(input).dims2().map(|d| d.1).unwrap_or(0);
        self.window(input, -(left as isize), cols + left + right)
    }

    /// Reverse sweep from a scalar root. Leaf gradients are summed over every
    /// use of the leaf and stored on the tape (see [`Tape::grad`]); gradients
    /// of intermediate nodes are discarded.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let rv = &self.nodes[root.0];
        if !rv.value.is_scalar() {
            return Err(Error::NonScalarRoot(rv.value.shape().to_vec()));
        }
        if !rv.requires_grad {
            return Err(Error::DetachedRoot);
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(i, g, &mut grads, &mut leaf_grads);
        }
        for (i, g) in leaf_grads {
            let shape = self.nodes[i].value.shape().to_vec();
            self.nodes[i].grad = Some(Tensor::new(shape, g)?);
        }
        Ok(())
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn propagate(
        &self,
        i: usize,
        g: Vec<f64>,
        grads: &mut [Option<Vec<f64>>],
        leaf_grads: &mut Vec<(usize, Vec<f64>)>,
    ) {
        let node = &self.nodes[i];
        let mut acc = |id: NodeId, contrib: Vec<f64>| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            match &mut grads[id.0] {
                Some(existing) => existing.iter_mut().zip(&contrib).for_each(|(e, c)| *e += c),
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => leaf_grads.push((i, g)),
            Op::Conv1d { input, kernel, geom } => {
                let x = self.value(*input);
                let t_in = x.shape()[1];
                let (gx, gw) = kernels::conv1d_backward(
                    x.data(),
                    t_in,
                    self.value(*kernel).data(),
                    geom,
                    &g,
                    self.wants(*input),
                    self.wants(*kernel),
                );
                if let Some(gx) = gx {
                    acc(*input, gx);
                }
                if let Some(gw) = gw {
                    acc(*kernel, gw);
                }
            }
            Op::ConvTranspose1d { input, kernel, stride } => {
                let x = self.value(*input);
                let w = self.value(*kernel);
                let (c_in, t_in) = (x.shape()[0], x.shape()[1]);
                let (c_out, len) = (w.shape()[1], w.shape()[2]);
                let (gx, gw) = kernels::conv_transpose1d_backward(
                    x.data(),
                    c_in,
                    t_in,
                    w.data(),
                    c_out,
                    len,
                    *stride,
                    &g,
                    self.wants(*input),
                    self.wants(*kernel),
                );
                if let Some(gx) = gx {
                    acc(*input, gx);
                }
                if let Some(gw) = gw {
                    acc(*kernel, gw);
                }
            }
            Op::AddBias { input, bias } => {
                if self.wants(*bias) {
                    let cols = node.value.shape()[1];
                    let gb = g.chunks(cols).map(|row| row.iter().sum()).collect();
                    acc(*bias, gb);
                }
                acc(*input, g);
            }
            Op::PRelu { input, slope } => {
                let x = self.value(*input);
                let a = self.value(*slope);
                let shared = a.numel() == 1;
                let per = x.numel() / channels_of(x).max(1);
                let ch = |idx: usize| if shared { 0 } else { idx / per };
                if self.wants(*slope) {
                    let mut ga = vec![0.0; a.numel()];
                    for (idx, (&xv, gv)) in x.data().iter().zip(&g).enumerate() {
                        if xv <= 0.0 {
                            ga[ch(idx)] += gv * xv;
                        }
                    }
                    acc(*slope, ga);
                }
                if self.wants(*input) {
                    let gx = x
                        .data()
                        .iter()
                        .zip(&g)
                        .enumerate()
                        .map(|(idx, (&xv, gv))| if xv > 0.0 { *gv } else { a.data()[ch(idx)] * gv })
                        .collect();
                    acc(*input, gx);
                }
            }
            Op::Sigmoid(input) => {
                let gx = node.value.data().iter().zip(&g).map(|(y, gv)| gv * y * (1.0 - y)).collect();
                acc(*input, gx);
            }
            Op::Relu(input) => {
                let x = self.value(*input);
                let gx = x.data().iter().zip(&g).map(|(&xv, gv)| if xv > 0.0 { *gv } else { 0.0 }).collect();
                acc(*input, gx);
            }
            Op::GlobalLayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let cols = node.value.shape()[1];
                if self.wants(*gain) {
                    let gg = g
                        .chunks(cols)
                        .zip(normalized.chunks(cols))
                        .map(|(gr, nr)| gr.iter().zip(nr).map(|(a, b)| a * b).sum())
                        .collect();
                    acc(*gain, gg);
                }
                if self.wants(*bias) {
                    acc(*bias, g.chunks(cols).map(|r| r.iter().sum()).collect());
                }
                if self.wants(*input) {
                    let gain_v = self.value(*gain).data();
                    let gn: Vec<f64> = g.iter().enumerate().map(|(idx, gv)| gv * gain_v[idx / cols]).collect();
                    let n = gn.len() as f64;
                    let mean_g = gn.iter().sum::<f64>() / n;
                    let mean_gn = gn.iter().zip(normalized).map(|(a, b)| a * b).sum::<f64>() / n;
                    let gx = gn
                        .iter()
                        .zip(normalized)
                        .map(|(gv, nv)| inv_std * (gv - mean_g - nv * mean_gn))
                        .collect();
                    acc(*input, gx);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g);
            }
            Op::Sub(a, b) => {
                acc(*b, g.iter().map(|v| -v).collect());
                acc(*a, g);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, g.iter().zip(vb).map(|(x, y)| x * y).collect());
                acc(*b, g.iter().zip(va).map(|(x, y)| x * y).collect());
            }
            Op::Scale(input, factor) => acc(*input, g.iter().map(|v| v * factor).collect()),
            Op::AddScalar(input) => acc(*input, g),
            Op::MulScalar { input, scalar } => {
                let x = self.value(*input).data();
                let s = self.value(*scalar).item();
                acc(*scalar, vec![g.iter().zip(x).map(|(a, b)| a * b).sum()]);
                acc(*input, g.iter().map(|v| v * s).collect());
            }
            Op::Dot(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, vb.iter().map(|v| v * g[0]).collect());
                acc(*b, va.iter().map(|v| v * g[0]).collect());
            }
            Op::Sum(input) => {
                let n = self.value(*input).numel();
                acc(*input, vec![g[0]; n]);
            }
            Op::Ln(input) => {
                let x = self.value(*input).data();
                acc(*input, g.iter().zip(x).map(|(a, b)| a / b).collect());
            }
            Op::Center(input) => {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                acc(*input, g.iter().map(|v| v - mean).collect());
            }
            Op::SliceRows { input, start } => {
                let x = self.value(*input);
                let cols = x.shape()[1];
                let mut gx = vec![0.0; x.numel()];
                gx[start * cols..start * cols + g.len()].copy_from_slice(&g);
                acc(*input, gx);
            }
            Op::Window { input, offset } => {
                let x = self.value(*input);
                let (rows, cols) = (x.shape()[0], x.shape()[1]);
                let len = node.value.shape()[1];
                let mut gx = vec![0.0; x.numel()];
                for r in 0..rows {
                    for t in 0..len {
                        let src = t as isize + offset;
                        if src >= 0 && (src as usize) < cols {
                            gx[r * cols + src as usize] += g[r * len + t];
                        }
                    }
                }
                acc(*input, gx);
            }
        }
    }
}
