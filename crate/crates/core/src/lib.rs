pub mod error;
pub mod seed;
pub mod worldgen;

pub use error::{Error, Result};
pub mod cli;
pub mod encoder;
pub mod evalkit;
pub mod fusion;
pub mod nncore;
pub mod policy;
pub mod trainer;
