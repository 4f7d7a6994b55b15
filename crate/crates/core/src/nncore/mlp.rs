use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

/// Affine map `y = act(W x + b)` with `W: [out × in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Activations saved by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input to each layer; `inputs[k + 1]` is the post-activation of layer `k`.
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients (or any per-parameter quantity) shaped like an [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrad>,
}

impl MlpGrads {
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weight *= k;
            l.bias *= k;
        }
    }

    /// Flattened in checkpoint order (per layer: weights row-major, then bias).
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|&v| v == 0.0)
    }
}

impl MlpParams {
    /// Validates that layer dims chain and the last layer is linear.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::dim("an MLP needs at least one layer"));
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::dim("bias length differs from layer output dim"));
            }
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::dim(format!(
                    "layer output {} does not feed input {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        if layers.last().unwrap().activation != Activation::Identity {
            return Err(Error::dim("final activation must be identity"));
        }
        Ok(MlpParams { layers })
    }

    /// Tanh hidden layers and a linear output layer. Weights are uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, d)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((fan_out, fan_in), |_| {
                        rng.gen_range(-limit..=limit)
                    }),
                    bias: Array1::zeros(fan_out),
                    activation: if k + 1 == n {
                        Activation::Identity
                    } else {
                        Activation::Tanh
                    },
                }
            })
            .collect();
        MlpParams { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Parameters flattened in checkpoint order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Overwrites parameters from a flat vector in checkpoint order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::dim("flat parameter length mismatch"));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// SHA-256 of the checkpoint encoding.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(super::checkpoint_bytes(self)))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::dim(format!(
                "input dim {cols} does not match first layer in-dim {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let next = apply_layer(layer, h.view());
            inputs.push(h);
            h = next;
        }
        let cache = MlpCache {
            inputs,
            output: h.clone(),
        };
        Ok((h, cache))
    }

    /// Forward pass without saving activations.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut h = apply_layer(&self.layers[0], x);
        for layer in &self.layers[1..] {
            h = apply_layer(layer, h.view());
        }
        Ok(h)
    }

    /// Reverse-mode pass. The input gradient is only formed when requested,
    /// which saves one matrix product on the first layer.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_y: ArrayView2<'_, f64>,
        need_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Array2<f64>>)> {
        let stale = cache.inputs.len() != self.layers.len()
            || cache
                .inputs
                .iter()
                .zip(&self.layers)
                .any(|(x, l)| x.ncols() != l.in_dim())
            || grad_y.dim() != cache.output.dim();
        if stale {
            return Err(Error::dim(
                "cache does not match these parameters or gradient",
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_y.to_owned();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if layer.activation == Activation::Tanh {
                let post = cache.inputs.get(k + 1).unwrap_or(&cache.output);
                ndarray::Zip::from(&mut g)
                    .and(post)
                    .for_each(|gi, &a| *gi *= 1.0 - a * a);
            }
            let input = &cache.inputs[k];
            grads.push(LayerGrad {
                weight: g.t().dot(input),
                bias: g.sum_axis(Axis(0)),
            });
            if k > 0 || need_input_grad {
                g = g.dot(&layer.weight);
            }
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, need_input_grad.then_some(g)))
    }
}

fn apply_layer(layer: &Layer, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = x.dot(&layer.weight.t());
    z += &layer.bias;
    if layer.activation == Activation::Tanh {
        z.mapv_inplace(f64::tanh);
    }
    z
}

fn out_shape(x: &Tensor, out: usize) -> Vec<usize> {
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = out;
    shape
}

/// Forward pass on a `[in]` or `[batch × in]` tensor.
pub fn mlp_forward(params: &MlpParams, x: &Tensor) -> Result<(Tensor, MlpCache)> {
    let (y, cache) = params.forward(x.as_matrix())?;
    let shape = out_shape(x, params.output_dim());
    Ok((Tensor::from_parts(shape, y.into_iter().collect()), cache))
}

/// Exact gradients with respect to parameters and input.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    grad_y: &Tensor,
) -> Result<(MlpGrads, Tensor)> {
    if grad_y.inner_dim() != params.output_dim() {
        return Err(Error::dim("gradient width differs from network output"));
    }
    let (grads, gx) = params.backward(cache, grad_y.as_matrix(), true)?;
    let shape = out_shape(grad_y, params.input_dim());
    Ok((
        grads,
        Tensor::from_parts(shape, gx.unwrap().into_iter().collect()),
    ))
}
