//! Sparse regression codes concatenated with non-binary LDPC codes, decoded
//! by approximate message passing with a belief-propagation denoiser.

pub mod amp;
pub mod bp;
pub mod codec;
pub mod config;
pub mod error;
pub mod gf;
pub mod ldpc;
pub mod rng;
pub mod se;
pub mod sim;

pub use error::{Error, Result};
