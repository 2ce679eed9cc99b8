//! Conv-TasNet separation model and its parameter partition.

mod checkpoint;
mod model;
mod params;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION};
pub use model::{BoundParams, ConvTasNet, ModelConfig};
pub use params::{Group, ModelParams, NamedTensor, Partition};
