//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"MSCK"
//! u32    format version
//! u64 x9 sources, enc_channels, kernel_len, stride, bottleneck, hidden,
//!        conv_kernel, blocks, repeats
//! u32    sample_rate
//! u32    tensor count
//! per tensor:
//!   u32 path length, path bytes (utf-8)
//!   u8  group (0 encoder, 1 separator, 2 decoder)
//!   u32 ndim, u64 x ndim extents
//!   f64 x numel raw values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::model::ModelConfig;
use super::params::{Group, ModelParams};
use crate::autograd::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MSCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(config: &ModelConfig, params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [
        config.sources,
        config.enc_channels,
        config.kernel_len,
        config.stride,
        config.bottleneck,
        config.hidden,
        config.conv_kernel,
        config.blocks,
        config.repeats,
    ] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&config.sample_rate.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for e in params.iter() {
        buf.extend_from_slice(&(e.path.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.path.as_bytes());
        buf.push(e.group.code());
        buf.extend_from_slice(&(e.value.shape().len() as u32).to_le_bytes());
        for &d in e.value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in e.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.bytes.len() < N {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    fn bytes(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, ModelParams)> {
    let mut r = Reader { bytes };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut dims = [0usize; 9];
    for d in &mut dims {
        *d = r.u64()? as usize;
    }
    let config = ModelConfig {
        sources: dims[0],
        enc_channels: dims[1],
        kernel_len: dims[2],
        stride: dims[3],
        bottleneck: dims[4],
        hidden: dims[5],
        conv_kernel: dims[6],
        blocks: dims[7],
        repeats: dims[8],
        sample_rate: r.u32()?,
    };
    let count = r.u32()? as usize;
    let mut params = ModelParams::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let path = String::from_utf8(r.bytes(len)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let code = r.take::<1>()?[0];
        let group = Group::from_code(code).ok_or_else(|| Error::Checkpoint(format!("bad group code {code}")))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        params.push(path, group, Tensor::new(shape, data)?);
    }
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((config, params))
}

pub fn save_checkpoint(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(config, params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
