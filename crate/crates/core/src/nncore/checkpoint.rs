//! Parameter checkpoints.
//!
//! ```text
//! magic    5 bytes  "LPAFW"
//! version  u16      1
//! layers   u32
//! per layer: out u32, in u32, activation u8 (0 identity, 1 tanh)
//! per layer: weight f64[out·in] row-major, bias f64[out]
//! ```
//! All values little-endian; loading reproduces parameters bit for bit.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, MlpParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"LPAFW";
const VERSION: u16 = 1;

pub fn checkpoint_bytes(params: &MlpParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for l in params.layers() {
        out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
        out.push(match l.activation {
            Activation::Identity => 0,
            Activation::Tanh => 1,
        });
    }
    for v in params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_checkpoint(bytes: &[u8]) -> std::result::Result<MlpParams, String> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(pos..pos + n).ok_or("truncated checkpoint")?;
        pos += n;
        Ok(s)
    };
    if take(5)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let out = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let inp = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let act = match take(1)?[0] {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            other => return Err(format!("unknown activation tag {other}")),
        };
        dims.push((out, inp, act));
    }
    let mut layers = Vec::with_capacity(n);
    for (out, inp, activation) in dims {
        let mut read = |count: usize| -> std::result::Result<Vec<f64>, String> {
            let raw = take(count * 8)?;
            Ok(raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let weight =
            Array2::from_shape_vec((out, inp), read(out * inp)?).map_err(|e| e.to_string())?;
        let bias = Array1::from(read(out)?);
        layers.push(Layer {
            weight,
            bias,
            activation,
        });
    }
    if pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    MlpParams::from_layers(layers).map_err(|e| e.to_string())
}

pub fn write_checkpoint(path: &Path, params: &MlpParams) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<MlpParams> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
