use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::error::{Error, Result};

/// Module a trainable tensor belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Encoder,
    Separator,
    Decoder,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Encoder, Group::Separator, Group::Decoder];

    /// Path prefix every tensor of the group carries.
    pub fn prefix(self) -> &'static str {
        match self {
            Group::Encoder => "encoder.",
            Group::Separator => "separator.",
            Group::Decoder => "decoder.",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Group::Encoder => 0,
            Group::Separator => 1,
            Group::Decoder => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Group> {
        Group::ALL.get(code as usize).copied()
    }
}

/// Which parameter groups an adaptation step may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// Every tensor ("m").
    WholeModel,
    /// Separator only ("a_s").
    SeparatorOnly,
    /// Encoder and decoder ("a_c").
    AutoencoderOnly,
}

impl Partition {
    pub fn contains(self, group: Group) -> bool {
        match self {
            Partition::WholeModel => true,
            Partition::SeparatorOnly => group == Group::Separator,
            Partition::AutoencoderOnly => group != Group::Separator,
        }
    }

    pub fn groups(self) -> Vec<Group> {
        Group::ALL.into_iter().filter(|g| self.contains(*g)).collect()
    }

    /// Short tag used in reports: `m`, `a_s`, `a_c`.
    pub fn tag(self) -> &'static str {
        match self {
            Partition::WholeModel => "m",
            Partition::SeparatorOnly => "a_s",
            Partition::AutoencoderOnly => "a_c",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" | "whole_model" => Ok(Partition::WholeModel),
            "a_s" | "separator_only" => Ok(Partition::SeparatorOnly),
            "a_c" | "autoencoder_only" => Ok(Partition::AutoencoderOnly),
            other => Err(Error::InvalidConfig(format!("unknown partition {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub path: String,
    pub group: Group,
    pub value: Tensor,
}

/// Ordered collection of named trainable tensors, each assigned to one group.
///
/// Also used as the gradient container: a gradient has the same paths and
/// shapes as the parameters it belongs to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    entries: Vec<NamedTensor>,
}

impl ModelParams {
    pub fn new() -> Self {
        ModelParams::default()
    }

    pub fn push(&mut self, path: impl Into<String>, group: Group, value: Tensor) {
        let path = path.into();
        debug_assert!(self.index_of(&path).is_none(), "duplicate path {path}");
        self.entries.push(NamedTensor { path, group, value });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedTensor> {
        self.entries.iter()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|e| &mut e.value)
    }

    pub fn entries(&self) -> &[NamedTensor] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &NamedTensor {
        &self.entries[index]
    }

    pub fn index_of(&self, path: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.path == path)
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.index_of(path).map(|i| &self.entries[i].value)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.index_of(path).map(move |i| &mut self.entries[i].value)
    }

    /// Tensors selected by a partition, in model order.
    pub fn partition_tensors(&self, partition: Partition) -> Vec<&NamedTensor> {
        self.entries.iter().filter(|e| partition.contains(e.group)).collect()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.numel()).sum()
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            entries: self
                .entries
                .iter()
                .map(|e| NamedTensor {
                    path: e.path.clone(),
                    group: e.group,
                    value: Tensor::zeros(e.value.shape()),
                })
                .collect(),
        }
    }

    fn check_layout(&self, other: &ModelParams) -> Result<()> {
        let same = self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.path == b.path && a.value.shape() == b.value.shape());
        if same {
            Ok(())
        } else {
            Err(Error::InvalidConfig("parameter sets have different layouts".into()))
        }
    }

    /// `self += scale * other` restricted to tensors in `partition`. Tensors
    /// outside the partition are not touched.
    pub fn axpy(&mut self, scale: f64, other: &ModelParams, partition: Partition) -> Result<()> {
        self.check_layout(other)?;
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if !partition.contains(dst.group) {
                continue;
            }
            for (d, s) in dst.value.data_mut().iter_mut().zip(src.value.data()) {
                *d += scale * s;
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &ModelParams) -> Result<()> {
        self.axpy(1.0, other, Partition::WholeModel)
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.value.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn dot(&self, other: &ModelParams) -> Result<f64> {
        self.check_layout(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a.value.dot(&b.value)).sum())
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.value.norm_sq()).sum::<f64>().sqrt()
    }

    /// L2 norm over the tensors of one group.
    pub fn group_norm(&self, group: Group) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.group == group)
            .map(|e| e.value.norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.all_finite())
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (i, e) in self.entries.iter().enumerate() {
            if index < e.value.numel() {
                return (i, index);
            }
            index -= e.value.numel();
        }
        panic!("scalar index out of range");
    }

    /// Scalar at a flat index over all tensors in model order.
    pub fn get_scalar(&self, index: usize) -> f64 {
        let (e, i) = self.locate(index);
        self.entries[e].value.data()[i]
    }

    pub fn set_scalar(&mut self, index: usize, value: f64) {
        let (e, i) = self.locate(index);
        self.entries[e].value.data_mut()[i] = value;
    }

    pub fn group_of_scalar(&self, index: usize) -> Group {
        self.entries[self.locate(index).0].group
    }
}
