pub mod autograd;
pub mod error;
pub mod harness;
pub mod metalearn;
pub mod objective;
pub mod taskgen;
pub mod tasnet;

pub use error::{Error, Result};
