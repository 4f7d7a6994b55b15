//! Behavior-cloning action head.
//!
//! The policy is a unit-variance Gaussian over 2D world-frame actions whose
//! mean comes from a `2051 → 256 (tanh) → 2` MLP fed with the latent and a
//! task one-hot. With fixed variance the negative log-likelihood reduces to
//! `½‖a − μ‖²`, and the greedy action is the clipped mean.

use ndarray::{s, Array2, ArrayView2};

use crate::encoder::{encode, EncoderSpec, LATENT_DIM};
use crate::error::{Error, Result};
use crate::fusion::FusionModule;
use crate::nncore::{MlpCache, MlpGrads, MlpParams};
use crate::seed::{self, tag};
use crate::worldgen::{clamp_step, Controller, Image, Observation, Vec2, TASK_COUNT};

pub const POLICY_HIDDEN: usize = 256;
pub const ACTION_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    mlp: MlpParams,
    latent_dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionDist {
    pub mean: Vec2,
}

impl ActionDist {
    /// `log N(a; μ, I)`
    pub fn log_prob(&self, a: Vec2) -> f64 {
        let d0 = a[0] - self.mean[0];
        let d1 = a[1] - self.mean[1];
        -0.5 * (d0 * d0 + d1 * d1) - (2.0 * std::f64::consts::PI).ln()
    }

    /// Greedy action: the mean, clipped to the per-step limit.
    pub fn greedy(&self) -> Vec2 {
        clamp_step(self.mean)
    }
}

impl PolicyParams {
    pub fn new(seed: u64) -> Self {
        PolicyParams::with_dims(LATENT_DIM, POLICY_HIDDEN, seed)
    }

    pub fn with_dims(latent_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seed::rng(&[seed, tag::INIT_POLICY]);
        PolicyParams {
            mlp: MlpParams::glorot(&[latent_dim + TASK_COUNT, hidden, ACTION_DIM], &mut rng),
            latent_dim,
        }
    }

    /// All-zero parameters; the mean is `(0, 0)` for every input.
    pub fn zeroed(latent_dim: usize, hidden: usize) -> Self {
        let mut p = PolicyParams::with_dims(latent_dim, hidden, 0);
        let n = p.mlp.param_count();
        p.mlp.set_flat(&vec![0.0; n]).unwrap();
        p
    }

    pub fn from_mlp(mlp: MlpParams) -> Result<Self> {
        if mlp.output_dim() != ACTION_DIM || mlp.input_dim() <= TASK_COUNT {
            return Err(Error::dim(
                "policy MLP must map latent + task one-hot to 2 outputs",
            ));
        }
        let latent_dim = mlp.input_dim() - TASK_COUNT;
        Ok(PolicyParams { mlp, latent_dim })
    }

    pub fn mlp(&self) -> &MlpParams {
        &self.mlp
    }

    pub(crate) fn mlp_mut(&mut self) -> &mut MlpParams {
        &mut self.mlp
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn digest(&self) -> String {
        self.mlp.digest()
    }

    /// `[z ; one_hot(task)]` for every row.
    pub fn inputs(&self, z: ArrayView2<'_, f64>, tasks: &[usize]) -> Result<Array2<f64>> {
        if z.ncols() != self.latent_dim {
            return Err(Error::dim(format!(
                "latent dim {} != {}",
                z.ncols(),
                self.latent_dim
            )));
        }
        if z.nrows() != tasks.len() {
            return Err(Error::dim("latent and task batches differ in length"));
        }
        let mut x = Array2::zeros((z.nrows(), self.latent_dim + TASK_COUNT));
        x.slice_mut(s![.., ..self.latent_dim]).assign(&z);
        for (row, &t) in tasks.iter().enumerate() {
            if t >= TASK_COUNT {
                return Err(Error::TaskOutOfRange(t));
            }
            x[[row, self.latent_dim + t]] = 1.0;
        }
        Ok(x)
    }

    /// Batched action means, one row per input.
    pub fn means(&self, z: ArrayView2<'_, f64>, tasks: &[usize]) -> Result<Array2<f64>> {
        self.mlp.predict(self.inputs(z, tasks)?.view())
    }

    fn forward(&self, z: ArrayView2<'_, f64>, tasks: &[usize]) -> Result<(Array2<f64>, MlpCache)> {
        self.mlp.forward(self.inputs(z, tasks)?.view())
    }
}

pub fn policy_forward(p: &PolicyParams, z: &[f64], task_id: usize) -> Result<ActionDist> {
    let view = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::dim(e.to_string()))?;
    let mu = p.means(view, &[task_id])?;
    Ok(ActionDist {
        mean: [mu[[0, 0]], mu[[0, 1]]],
    })
}

pub struct ActionLossOutput {
    pub loss: f64,
    pub grads: MlpGrads,
    pub grad_z: Array2<f64>,
}

/// `(1/N) Σ ½‖a_n − μ_n‖²` with gradients for the parameters and the latents.
pub fn action_loss(
    p: &PolicyParams,
    z: ArrayView2<'_, f64>,
    tasks: &[usize],
    actions: ArrayView2<'_, f64>,
) -> Result<ActionLossOutput> {
    action_loss_with(p, z, tasks, actions, true)
}

pub(crate) fn action_loss_with(
    p: &PolicyParams,
    z: ArrayView2<'_, f64>,
    tasks: &[usize],
    actions: ArrayView2<'_, f64>,
    need_latent_grad: bool,
) -> Result<ActionLossOutput> {
    let n = z.nrows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if actions.dim() != (n, ACTION_DIM) {
        return Err(Error::dim("action batch must be N × 2"));
    }
    let (mu, cache) = p.forward(z, tasks)?;
    let diff = &mu - &actions;
    let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let grad_mu = diff / n as f64;
    let (grads, gx) = p.mlp.backward(&cache, grad_mu.view(), need_latent_grad)?;
    let grad_z = match gx {
        Some(g) => g.slice(s![.., ..p.latent_dim]).to_owned(),
        None => Array2::zeros((0, 0)),
    };
    Ok(ActionLossOutput {
        loss,
        grads,
        grad_z,
    })
}

/// Encode, optionally fuse, read out the clipped mean.
pub fn act(
    p: &PolicyParams,
    f: Option<&FusionModule>,
    encoder: &EncoderSpec,
    img: &Image,
    task_id: usize,
) -> Result<Vec2> {
    let z = encode(encoder, img).into_vec();
    let z = match f {
        Some(f) => f.fuse_slice(&z)?,
        None => z,
    };
    Ok(policy_forward(p, &z, task_id)?.greedy())
}

/// A trained policy (with or without fusion) driving a rollout from pixels.
pub struct LearnedController<'a> {
    pub policy: &'a PolicyParams,
    pub fusion: Option<&'a FusionModule>,
    pub encoder: &'a EncoderSpec,
}

impl Controller for LearnedController<'_> {
    fn action(&self, obs: &Observation<'_>) -> Result<Vec2> {
        act(
            self.policy,
            self.fusion,
            self.encoder,
            obs.image,
            obs.task_id,
        )
    }
}
