use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Group, ModelParams};
use crate::autograd::{ConvOptions, NodeId, Tape, Tensor};
use crate::error::{Error, Result};

const GLN_EPS: f64 = 1e-8;
const PRELU_INIT: f64 = 0.25;

/// Conv-TasNet hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of sources `C`.
    pub sources: usize,
    /// Encoder basis count `D`.
    pub enc_channels: usize,
    /// Encoder kernel length `L` in samples.
    pub kernel_len: usize,
    /// Encoder hop in samples; always `L / 2`.
    pub stride: usize,
    /// Separator bottleneck channels.
    pub bottleneck: usize,
    /// Hidden channels inside a temporal block.
    pub hidden: usize,
    /// Depthwise kernel length `P`.
    pub conv_kernel: usize,
    /// Blocks per repeat `X`.
    pub blocks: usize,
    /// Repeats `R`.
    pub repeats: usize,
    pub sample_rate: u32,
}

impl Default for ModelConfig {
    /// Desk-scale configuration.
    fn default() -> Self {
        ModelConfig {
            sources: 2,
            enc_channels: 64,
            kernel_len: 16,
            stride: 8,
            bottleneck: 32,
            hidden: 64,
            conv_kernel: 3,
            blocks: 4,
            repeats: 2,
            sample_rate: 8000,
        }
    }
}

impl ModelConfig {
    /// Best-performing full-size Conv-TasNet configuration (N=512, L=16,
    /// B=128, H=512, P=3, X=8, R=3).
    pub fn full_size() -> Self {
        ModelConfig {
            sources: 2,
            enc_channels: 512,
            kernel_len: 16,
            stride: 8,
            bottleneck: 128,
            hidden: 512,
            conv_kernel: 3,
            blocks: 8,
            repeats: 3,
            sample_rate: 8000,
        }
    }

    /// Small model used by the end-to-end experiments.
    pub fn toy() -> Self {
        ModelConfig {
            sources: 2,
            enc_channels: 16,
            kernel_len: 16,
            stride: 8,
            bottleneck: 16,
            hidden: 32,
            conv_kernel: 3,
            blocks: 3,
            repeats: 1,
            sample_rate: 8000,
        }
    }

    /// Smallest structurally complete model, for gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            sources: 2,
            enc_channels: 4,
            kernel_len: 4,
            stride: 2,
            bottleneck: 4,
            hidden: 4,
            conv_kernel: 3,
            blocks: 1,
            repeats: 1,
            sample_rate: 8000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            self.enc_channels,
            self.kernel_len,
            self.stride,
            self.bottleneck,
            self.hidden,
            self.conv_kernel,
            self.blocks,
            self.repeats,
        ];
        if self.sources < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 sources, got {}", self.sources)));
        }
        if extents.contains(&0) || self.sample_rate == 0 {
            return Err(Error::InvalidConfig("all model extents must be positive".into()));
        }
        if !self.kernel_len.is_multiple_of(2) || self.stride * 2 != self.kernel_len {
            return Err(Error::InvalidConfig(format!(
                "stride must be half the kernel length (L={}, stride={})",
                self.kernel_len, self.stride
            )));
        }
        Ok(())
    }

    /// Number of encoder frames for an input of `samples` samples.
    pub fn frames(&self, samples: usize) -> usize {
        (samples - self.kernel_len) / self.stride + 1
    }

    /// Decoder output length for `frames` frames.
    pub fn decoded_len(&self, frames: usize) -> usize {
        (frames - 1) * self.stride + self.kernel_len
    }

    fn block_count(&self) -> usize {
        self.blocks * self.repeats
    }
}

/// Leaves for one [`ModelParams`] registered on a tape, addressable by path.
pub struct BoundParams<'p> {
    params: &'p ModelParams,
    ids: Vec<NodeId>,
}

impl<'p> BoundParams<'p> {
    /// Registers every tensor; only those for which `trainable` returns true
    /// are marked as requiring gradients.
    pub fn register(tape: &mut Tape, params: &'p ModelParams, trainable: impl Fn(Group) -> bool) -> Self {
        let ids = params
            .iter()
            .map(|e| tape.leaf(e.value.clone(), trainable(e.group)))
            .collect();
        BoundParams { params, ids }
    }

    pub fn get(&self, path: &str) -> Result<NodeId> {
        self.params
            .index_of(path)
            .map(|i| self.ids[i])
            .ok_or_else(|| Error::InvalidConfig(format!("missing parameter {path}")))
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Collects leaf gradients after `tape.backward`, with zeros for tensors
    /// that received none.
    pub fn gradients(&self, tape: &mut Tape) -> ModelParams {
        let mut grads = self.params.zeros_like();
        for (i, &id) in self.ids.iter().enumerate() {
            if let Some(g) = tape.take_grad(id) {
                *grads.get_mut(&self.params.entry(i).path).expect("same layout") = g;
            }
        }
        grads
    }
}

/// Encoder / mask-estimating separator / decoder.
///
/// The separator is gLN, a 1x1 bottleneck conv, `R` repeats of `X`
/// temporal blocks with dilation `2^x`, PReLU, and a 1x1 conv to `C * D`
/// channels followed by a sigmoid. Each block is 1x1 conv, PReLU, gLN,
/// dilated depthwise conv, PReLU, gLN, then 1x1 residual and skip convs;
/// the final block has no residual conv since nothing consumes it.
#[derive(Clone, Debug)]
pub struct ConvTasNet {
    config: ModelConfig,
}

fn block_prefix(i: usize) -> String {
    format!("separator.blocks.{i}")
}

impl ConvTasNet {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(ConvTasNet { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Tensor paths, groups and shapes in model order.
    pub fn layout(&self) -> Vec<(String, Group, Vec<usize>)> {
        let c = &self.config;
        let (d, b, h) = (c.enc_channels, c.bottleneck, c.hidden);
        let mut out = vec![("encoder.weight".to_string(), Group::Encoder, vec![d, 1, c.kernel_len])];
        let mut sep = |name: String, shape: Vec<usize>| out.push((name, Group::Separator, shape));
        sep("separator.norm.gain".into(), vec![d]);
        sep("separator.norm.bias".into(), vec![d]);
        sep("separator.bottleneck.weight".into(), vec![b, d, 1]);
        sep("separator.bottleneck.bias".into(), vec![b]);
        let n_blocks = c.block_count();
        for i in 0..n_blocks {
            let p = block_prefix(i);
            sep(format!("{p}.conv_in.weight"), vec![h, b, 1]);
            sep(format!("{p}.conv_in.bias"), vec![h]);
            sep(format!("{p}.prelu1.slope"), vec![h]);
            sep(format!("{p}.norm1.gain"), vec![h]);
            sep(format!("{p}.norm1.bias"), vec![h]);
            sep(format!("{p}.depthwise.weight"), vec![h, 1, c.conv_kernel]);
            sep(format!("{p}.depthwise.bias"), vec![h]);
            sep(format!("{p}.prelu2.slope"), vec![h]);
            sep(format!("{p}.norm2.gain"), vec![h]);
            sep(format!("{p}.norm2.bias"), vec![h]);
            if i + 1 < n_blocks {
                sep(format!("{p}.residual.weight"), vec![b, h, 1]);
                sep(format!("{p}.residual.bias"), vec![b]);
            }
            sep(format!("{p}.skip.weight"), vec![b, h, 1]);
            sep(format!("{p}.skip.bias"), vec![b]);
        }
        sep("separator.out_prelu.slope".into(), vec![b]);
        sep("separator.mask.weight".into(), vec![c.sources * d, b, 1]);
        sep("separator.mask.bias".into(), vec![c.sources * d]);
        out.push(("decoder.weight".to_string(), Group::Decoder, vec![d, 1, c.kernel_len]));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|(_, _, s)| s.iter().product::<usize>()).sum()
    }

    fn fan_in(&self, path: &str, shape: &[usize]) -> usize {
        let c = &self.config;
        if path == "decoder.weight" {
            // each output sample sums D channels over L / stride taps
            return c.enc_channels * c.kernel_len / c.stride;
        }
        if path.ends_with(".bias") {
            // matching weight fan-in
            let weight = path.trim_end_matches(".bias").to_string() + ".weight";
            if let Some((_, _, ws)) = self.layout().into_iter().find(|(p, _, _)| *p == weight) {
                return ws[1] * ws[2];
            }
        }
        shape[1] * shape[2]
    }

    /// Seeded initialization: conv weights and biases uniform in `[-k, k]`
    /// with `k = 1 / sqrt(fan_in)`, norm gains 1, norm biases 0, PReLU slopes 0.25.
    pub fn init_params(&self, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        for (path, group, shape) in self.layout() {
            let n: usize = shape.iter().product();
            let data = if path.ends_with(".gain") {
                vec![1.0; n]
            } else if path.contains("norm") && path.ends_with(".bias") {
                vec![0.0; n]
            } else if path.ends_with(".slope") {
                vec![PRELU_INIT; n]
            } else {
                let k = 1.0 / (self.fan_in(&path, &shape) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-k..=k)).collect()
            };
            params.push(path, group, Tensor::new(shape, data).expect("layout shape"));
        }
        params
    }

    /// Mixture `[1, T]` to nonnegative representation `[D, T']`.
    pub fn encode(&self, tape: &mut Tape, p: &BoundParams, mixture: NodeId) -> Result<NodeId> {
        let t = tape.value(mixture).numel();
        if t < self.config.kernel_len {
            return Err(Error::TooShort {
                required: self.config.kernel_len,
                got: t,
            });
        }
        let w = p.get("encoder.weight")?;
        let h = tape.conv1d(mixture, w, self.config.stride)?;
        Ok(tape.relu(h))
    }

    fn pointwise(&self, tape: &mut Tape, p: &BoundParams, x: NodeId, name: &str) -> Result<NodeId> {
        let y = tape.conv1d(x, p.get(&format!("{name}.weight"))?, 1)?;
        tape.add_bias(y, p.get(&format!("{name}.bias"))?)
    }

    fn block(&self, tape: &mut Tape, p: &BoundParams, x: NodeId, index: usize) -> Result<(Option<NodeId>, NodeId)> {
        let c = &self.config;
        let pre = block_prefix(index);
        let dilation = 1usize << (index % c.blocks);
        let y = self.pointwise(tape, p, x, &format!("{pre}.conv_in"))?;
        let y = tape.prelu(y, p.get(&format!("{pre}.prelu1.slope"))?)?;
        let y = tape.global_layer_norm(y, p.get(&format!("{pre}.norm1.gain"))?, p.get(&format!("{pre}.norm1.bias"))?, GLN_EPS)?;
        let pad = (c.conv_kernel - 1) * dilation;
        let y = tape.pad_cols(y, pad / 2, pad - pad / 2)?;
        let y = tape.conv1d_with(
            y,
            p.get(&format!("{pre}.depthwise.weight"))?,
            ConvOptions {
                stride: 1,
                dilation,
                groups: c.hidden,
            },
        )?;
        let y = tape.add_bias(y, p.get(&format!("{pre}.depthwise.bias"))?)?;
        let y = tape.prelu(y, p.get(&format!("{pre}.prelu2.slope"))?)?;
        let y = tape.global_layer_norm(y, p.get(&format!("{pre}.norm2.gain"))?, p.get(&format!("{pre}.norm2.bias"))?, GLN_EPS)?;
        let residual = if index + 1 < c.block_count() {
            let r = self.pointwise(tape, p, y, &format!("{pre}.residual"))?;
            Some(tape.add(x, r)?)
        } else {
            None
        };
        let skip = self.pointwise(tape, p, y, &format!("{pre}.skip"))?;
        Ok((residual, skip))
    }

    /// `C` masks of shape `[D, T']`, each entry in `[0, 1]`.
    pub fn separate(&self, tape: &mut Tape, p: &BoundParams, h: NodeId) -> Result<Vec<NodeId>> {
        let c = &self.config;
        let y = tape.global_layer_norm(h, p.get("separator.norm.gain")?, p.get("separator.norm.bias")?, GLN_EPS)?;
        let mut x = self.pointwise(tape, p, y, "separator.bottleneck")?;
        let mut skip_sum: Option<NodeId> = None;
        for i in 0..c.block_count() {
            let (residual, skip) = self.block(tape, p, x, i)?;
            skip_sum = Some(match skip_sum {
                Some(s) => tape.add(s, skip)?,
                None => skip,
            });
            if let Some(r) = residual {
                x = r;
            }
        }
        let y = tape.prelu(skip_sum.expect("at least one block"), p.get("separator.out_prelu.slope")?)?;
        let y = self.pointwise(tape, p, y, "separator.mask")?;
        let masks = tape.sigmoid(y);
        let d = c.enc_channels;
        (0..c.sources).map(|i| tape.slice_rows(masks, i * d, (i + 1) * d)).collect()
    }

    /// `d = h ⊙ mask`.
    pub fn apply_mask(tape: &mut Tape, h: NodeId, mask: NodeId) -> Result<NodeId> {
        tape.mul(h, mask)
    }

    /// Masked representation `[D, T']` to waveform `[1, (T' - 1) * stride + L]`.
    pub fn decode(&self, tape: &mut Tape, p: &BoundParams, d: NodeId) -> Result<NodeId> {
        tape.conv1d_transpose(d, p.get("decoder.weight")?, self.config.stride)
    }

    /// Full pass on a tape. Returns `C` estimates of shape `[1, T]`, trimmed or
    /// zero-padded on the right to the input length.
    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, mixture: &[f64]) -> Result<Vec<NodeId>> {
        let t = mixture.len();
        let x = tape.constant(Tensor::row(mixture.to_vec()));
        let h = self.encode(tape, p, x)?;
        let masks = self.separate(tape, p, h)?;
        masks
            .into_iter()
            .map(|m| {
                let d = Self::apply_mask(tape, h, m)?;
                let s = self.decode(tape, p, d)?;
                tape.window(s, 0, t)
            })
            .collect()
    }

    /// Value-only separation of one mixture.
    pub fn separate_signal(&self, params: &ModelParams, mixture: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let bound = BoundParams::register(&mut tape, params, |_| false);
        let outs = self.forward(&mut tape, &bound, mixture)?;
        Ok(outs.into_iter().map(|id| tape.value(id).data().to_vec()).collect())
    }
}
