use serde::{Deserialize, Serialize};

use super::{MlpGrads, MlpParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and step counter for one parameter set.
#[derive(Clone, Debug)]
pub struct OptState {
    pub config: AdamConfig,
    m: MlpGrads,
    v: MlpGrads,
    step: u64,
}

impl OptState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        OptState {
            config,
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, opt: &mut OptState) -> Result<()> {
    let shapes_match = params.layers().len() == grads.layers.len()
        && params.layers().len() == opt.m.layers.len()
        && params
            .layers()
            .iter()
            .zip(&grads.layers)
            .zip(&opt.m.layers)
            .all(|((p, g), m)| {
                p.weight.dim() == g.weight.dim()
                    && p.bias.len() == g.bias.len()
                    && m.weight.dim() == p.weight.dim()
            });
    if !shapes_match {
        return Err(Error::dim(
            "gradient or optimizer state shape differs from parameters",
        ));
    }
    if !grads.all_finite() {
        return Err(Error::Divergence("non-finite gradient".into()));
    }
    opt.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = opt.config;
    let c1 = 1.0 - beta1.powi(opt.step as i32);
    let c2 = 1.0 - beta2.powi(opt.step as i32);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (((layer, g), m), v) in params
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut opt.m.layers)
        .zip(&mut opt.v.layers)
    {
        ndarray::Zip::from(&mut layer.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
