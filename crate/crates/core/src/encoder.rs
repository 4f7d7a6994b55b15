//! Frozen patch featurizer.
//!
//! The image is cut into 64 non-overlapping 4×4 patches; each flattened patch
//! (48 values) goes through one fixed random affine map and `tanh`, giving a
//! 32-dim token. Tokens are laid out token-major in a 2048-dim latent vector.
//! The projection is generated once from a fixed seed and has no mutable
//! accessors.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worldgen::{Image, CHANNELS, IMAGE_LEN, IMAGE_SIZE};

pub const PATCH: usize = 4;
pub const GRID: usize = IMAGE_SIZE / PATCH;
pub const TOKENS: usize = GRID * GRID;
pub const PATCH_LEN: usize = PATCH * PATCH * CHANNELS;
pub const TOKEN_DIM: usize = 32;
pub const LATENT_DIM: usize = TOKENS * TOKEN_DIM;
pub const ENCODER_SEED: u64 = 0xE0C0DE;

const BIAS_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    seed: u64,
    projection: Array2<f64>,
    bias: Array1<f64>,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::from_seed(ENCODER_SEED)
    }
}

impl EncoderSpec {
    /// Projection entries ~ N(0, 1/48), bias ~ N(0, 0.1²).
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Normal::new(0.0, 1.0 / (PATCH_LEN as f64).sqrt()).unwrap();
        let b = Normal::new(0.0, BIAS_STD).unwrap();
        let projection = Array2::from_shape_fn((TOKEN_DIM, PATCH_LEN), |_| w.sample(&mut rng));
        let bias = Array1::from_shape_fn(TOKEN_DIM, |_| b.sample(&mut rng));
        EncoderSpec {
            seed,
            projection,
            bias,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self) -> &Array2<f64> {
        &self.projection
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Flattened patch `(row, col)` in `[y][x][c]` order.
    pub fn patch(pixels: &[f32], row: usize, col: usize) -> [f64; PATCH_LEN] {
        let mut out = [0.0; PATCH_LEN];
        let mut k = 0;
        for dy in 0..PATCH {
            let y = row * PATCH + dy;
            let start = (y * IMAGE_SIZE + col * PATCH) * CHANNELS;
            for &v in &pixels[start..start + PATCH * CHANNELS] {
                out[k] = v as f64;
                k += 1;
            }
        }
        out
    }

    /// Projects one flattened patch to a token.
    pub fn project(&self, patch: &[f64; PATCH_LEN], token: &mut [f64]) {
        for (t, (row, b)) in token
            .iter_mut()
            .zip(self.projection.rows().into_iter().zip(&self.bias))
        {
            let z: f64 = row.iter().zip(patch).map(|(w, x)| w * x).sum();
            *t = (z + b).tanh();
        }
    }

    /// Writes the latent of a raw `[y][x][c]` pixel buffer into `out`.
    pub fn encode_into(&self, pixels: &[f32], out: &mut [f64]) -> Result<()> {
        if pixels.len() != IMAGE_LEN {
            return Err(Error::dim(format!(
                "image must hold {IMAGE_LEN} values, got {}",
                pixels.len()
            )));
        }
        if out.len() != LATENT_DIM {
            return Err(Error::dim("latent buffer must be 2048 long"));
        }
        for row in 0..GRID {
            for col in 0..GRID {
                let t = row * GRID + col;
                let patch = Self::patch(pixels, row, col);
                self.project(&patch, &mut out[t * TOKEN_DIM..(t + 1) * TOKEN_DIM]);
            }
        }
        Ok(())
    }

    pub fn encode_raw(&self, pixels: &[f32]) -> Result<LatentVec> {
        let mut out = vec![0.0; LATENT_DIM];
        self.encode_into(pixels, &mut out)?;
        Ok(LatentVec(out))
    }
}

pub fn encode(spec: &EncoderSpec, img: &Image) -> LatentVec {
    spec.encode_raw(img.data())
        .expect("images are always 32×32×3")
}

/// Flattened token features, token `t` at `[t·32, (t+1)·32)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVec(Vec<f64>);

impl LatentVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != LATENT_DIM {
            return Err(Error::dim(format!(
                "latent must be {LATENT_DIM} long, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::dim("non-finite latent entry"));
        }
        Ok(LatentVec(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// 8×8 grid of 32-dim tokens borrowed from a latent.
#[derive(Clone, Copy, Debug)]
pub struct TokenGrid<'a> {
    values: &'a [f64],
}

impl<'a> TokenGrid<'a> {
    pub fn dims(&self) -> (usize, usize) {
        (GRID, GRID)
    }

    pub fn token(&self, row: usize, col: usize) -> &'a [f64] {
        let t = row * GRID + col;
        &self.values[t * TOKEN_DIM..(t + 1) * TOKEN_DIM]
    }

    pub fn flatten(&self) -> LatentVec {
        LatentVec(self.values.to_vec())
    }
}

pub fn token_view(latent: &LatentVec) -> TokenGrid<'_> {
    TokenGrid { values: &latent.0 }
}

/// Token grid over any 2048-long slice (e.g. a row of a latent batch).
pub fn token_view_slice(values: &[f64]) -> TokenGrid<'_> {
    assert_eq!(values.len(), LATENT_DIM);
    TokenGrid { values }
}
