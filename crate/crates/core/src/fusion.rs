//! Residual latent fusion module.
//!
//! `fuse(z) = z + mlp(z)` with a `2048 → 512 (tanh) → 2048` MLP whose output
//! layer starts at exactly zero, so a fresh module is the identity map. It is
//! trained to carry auxiliary-view latents onto the latent of the same state
//! seen from the reference view.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::encoder::{LatentVec, LATENT_DIM};
use crate::error::{Error, Result};
use crate::nncore::{cosine_pair, mse_pair, MlpCache, MlpGrads, MlpParams};
use crate::seed::{self, tag};

pub const FUSION_HIDDEN: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignKind {
    Mse,
    Cos,
}

impl AlignKind {
    pub const ALL: [AlignKind; 2] = [AlignKind::Mse, AlignKind::Cos];

    pub fn label(self) -> &'static str {
        match self {
            AlignKind::Mse => "MSE",
            AlignKind::Cos => "COS",
        }
    }
}

impl std::str::FromStr for AlignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(AlignKind::Mse),
            "cos" => Ok(AlignKind::Cos),
            other => Err(Error::InvalidConfig(format!(
                "unknown alignment loss {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionModule {
    mlp: MlpParams,
}

pub struct FusionCache {
    mlp: MlpCache,
}

impl FusionModule {
    /// Full-size module, identity at initialization.
    pub fn new(seed: u64) -> Self {
        FusionModule::with_dims(LATENT_DIM, FUSION_HIDDEN, seed)
    }

    /// Same construction for arbitrary widths (toy configurations in tests).
    pub fn with_dims(latent_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seed::rng(&[seed, tag::INIT_FUSION]);
        let mut mlp = MlpParams::glorot(&[latent_dim, hidden, latent_dim], &mut rng);
        let last = mlp.layers_mut().last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        FusionModule { mlp }
    }

    pub fn from_mlp(mlp: MlpParams) -> Result<Self> {
        if mlp.input_dim() != mlp.output_dim() {
            return Err(Error::dim(
                "residual fusion needs equal input and output dims",
            ));
        }
        Ok(FusionModule { mlp })
    }

    pub fn mlp(&self) -> &MlpParams {
        &self.mlp
    }

    pub(crate) fn mlp_mut(&mut self) -> &mut MlpParams {
        &mut self.mlp
    }

    pub fn dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn digest(&self) -> String {
        self.mlp.digest()
    }

    pub fn forward(&self, z: ArrayView2<'_, f64>) -> Result<(Array2<f64>, FusionCache)> {
        let (delta, cache) = self.mlp.forward(z)?;
        Ok((delta + z, FusionCache { mlp: cache }))
    }

    /// Fuses every row of `z`.
    pub fn fuse_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.mlp.predict(z)? + z)
    }

    pub fn fuse_slice(&self, z: &[f64]) -> Result<Vec<f64>> {
        let view =
            ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::dim(e.to_string()))?;
        Ok(self.fuse_batch(view)?.into_iter().collect())
    }

    /// Gradients through the residual map. The input gradient adds the skip path.
    pub fn backward(
        &self,
        cache: &FusionCache,
        grad_out: ArrayView2<'_, f64>,
        need_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Array2<f64>>)> {
        let (grads, gx) = self.mlp.backward(&cache.mlp, grad_out, need_input_grad)?;
        Ok((grads, gx.map(|g| g + grad_out)))
    }
}

pub fn fuse(f: &FusionModule, z: &LatentVec) -> Result<LatentVec> {
    if f.dim() != LATENT_DIM {
        return Err(Error::dim("module width differs from latent dim"));
    }
    LatentVec::new(f.fuse_slice(z.as_slice())?)
}

/// Batch-mean alignment loss between `pred` rows and `target` rows, with the
/// gradient with respect to `pred`.
pub fn alignment_terms(
    kind: AlignKind,
    pred: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::dim(format!(
            "batch shapes {:?} and {:?} differ",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.nrows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut total = 0.0;
    for ((p, t), mut g) in pred
        .outer_iter()
        .zip(target.outer_iter())
        .zip(grad.axis_iter_mut(Axis(0)))
    {
        let (p, t) = (p.as_slice().unwrap(), t.as_slice().unwrap());
        let (l, gp) = match kind {
            AlignKind::Mse => mse_pair(p, t),
            AlignKind::Cos => cosine_pair(p, t)?,
        };
        total += l;
        for (gi, v) in g.iter_mut().zip(gp) {
            *gi = v / n as f64;
        }
    }
    Ok((total / n as f64, grad))
}

pub struct AlignmentOutput {
    pub loss: f64,
    pub grads: MlpGrads,
    pub grad_z_aux: Array2<f64>,
}

/// Mean over the batch of `d(z_ref, fuse(z_aux))`.
pub fn alignment_loss(
    kind: AlignKind,
    f: &FusionModule,
    z_aux: ArrayView2<'_, f64>,
    z_ref: ArrayView2<'_, f64>,
) -> Result<AlignmentOutput> {
    if z_aux.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let (fused, cache) = f.forward(z_aux)?;
    let (loss, g) = alignment_terms(kind, fused.view(), z_ref)?;
    let (grads, gz) = f.backward(&cache, g.view(), true)?;
    Ok(AlignmentOutput {
        loss,
        grads,
        grad_z_aux: gz.unwrap(),
    })
}
