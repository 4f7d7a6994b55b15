use super::Tensor;
use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-8;

/// Mean squared difference and its gradient with respect to `pred`.
pub fn mse_pair(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(pred.len(), target.len());
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            sum += d * d;
            2.0 * d / n
        })
        .collect();
    (sum / n, grad)
}

/// `1 − cos(pred, target)` and its gradient with respect to `pred`.
pub fn cosine_pair(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    debug_assert_eq!(pred.len(), target.len());
    let dot: f64 = pred.iter().zip(target).map(|(a, b)| a * b).sum();
    let pn = pred.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tn = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    if pn <= MIN_NORM || tn <= MIN_NORM {
        return Err(Error::DegenerateVector(pn.min(tn)));
    }
    let cos = dot / (pn * tn);
    // d cos / d p = t / (|p||t|) − cos · p / |p|²
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| -(t / (pn * tn) - cos * p / (pn * pn)))
        .collect();
    Ok((1.0 - cos, grad))
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(pred, target)?;
    let (l, g) = mse_pair(pred.data(), target.data());
    Ok((l, Tensor::from_parts(pred.shape().to_vec(), g)))
}

pub fn cosine_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    same_shape(pred, target)?;
    let (l, g) = cosine_pair(pred.data(), target.data())?;
    Ok((l, Tensor::from_parts(pred.shape().to_vec(), g)))
}
