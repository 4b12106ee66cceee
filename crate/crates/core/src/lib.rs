//! Optimal prefix codes for finite and countably infinite alphabets under
//! exponential and redundancy penalties.

pub mod analysis;
pub mod bits;
pub mod cli;
pub mod buffer;
pub mod codec;
pub mod error;
pub mod golomb;
pub mod huffman;
pub mod light_tail;
pub mod model;
pub mod registry;

pub use error::{Error, Result};
