use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, token_view_slice, EncoderSpec, GRID, PATCH};
use crate::error::{Error, Result};
use crate::fusion::FusionModule;
use crate::worldgen::{disc_pixels, render, PairedState, Scene, Vec2, ViewSpec};

/// Cosine similarity, or `None` when either vector is (near) zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na <= 1e-12 || nb <= 1e-12 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub theta_deg: f64,
    pub pairs: usize,
    pub raw_mse: f64,
    pub fused_mse: f64,
    pub raw_cos: f64,
    pub fused_cos: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// One row per viewpoint, ascending.
    pub rows: Vec<AlignmentRow>,
}

impl AlignmentReport {
    pub fn row(&self, theta_deg: f64) -> Option<&AlignmentRow> {
        self.rows.iter().find(|r| r.theta_deg == theta_deg)
    }
}

/// Per-viewpoint mean distance between reference latents and auxiliary
/// latents, raw and after `fusion`. Without a module the fused columns equal
/// the raw ones.
pub fn alignment_report(
    fusion: Option<&FusionModule>,
    encoder: &EncoderSpec,
    pairs: &[PairedState],
) -> Result<AlignmentReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_pair: Vec<(f64, [f64; 4])> = pairs
        .par_iter()
        .map(|p| {
            let z_ref = encode(encoder, &p.reference).into_vec();
            let z_aux = encode(encoder, &p.auxiliary).into_vec();
            let z_fused = match fusion {
                Some(f) => f.fuse_slice(&z_aux)?,
                None => z_aux.clone(),
            };
            let cos = |a: &[f64]| cosine_similarity(&z_ref, a).ok_or(Error::DegenerateVector(0.0));
            Ok((
                p.theta_deg,
                [
                    mse(&z_ref, &z_aux),
                    mse(&z_ref, &z_fused),
                    cos(&z_aux)?,
                    cos(&z_fused)?,
                ],
            ))
        })
        .collect::<Result<_>>()?;
    let mut thetas: Vec<f64> = per_pair.iter().map(|(t, _)| *t).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    let rows = thetas
        .into_iter()
        .map(|theta_deg| {
            let mut sums = [0.0; 4];
            let mut n = 0;
            for (_, m) in per_pair.iter().filter(|(t, _)| *t == theta_deg) {
                for (s, v) in sums.iter_mut().zip(m) {
                    *s += v;
                }
                n += 1;
            }
            let [raw_mse, fused_mse, raw_cos, fused_cos] = sums.map(|s| s / n as f64);
            AlignmentRow {
                theta_deg,
                pairs: n,
                raw_mse,
                fused_mse,
                raw_cos,
                fused_cos,
            }
        })
        .collect();
    Ok(AlignmentReport { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    /// `grid[row][col]`: cosine similarity of token slot `(row, col)`.
    pub grid: [[f64; GRID]; GRID],
    pub theta_deg: f64,
    pub scene_seed: u64,
    pub fused: bool,
    /// Slots where either token was zero; their value is recorded as 0.
    pub degenerate: Vec<(usize, usize)>,
}

impl HeatmapResult {
    pub fn mean_over(&self, slots: &[(usize, usize)]) -> f64 {
        slots.iter().map(|&(r, c)| self.grid[r][c]).sum::<f64>() / slots.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.grid.iter().flatten().sum::<f64>() / (GRID * GRID) as f64
    }
}

/// Token slots `(row, col)` overlapping the target disc in the reference render.
pub fn target_tokens(scene: &Scene) -> Vec<(usize, usize)> {
    disc_pixels(scene.target(), &ViewSpec::reference())
        .into_iter()
        .map(|(x, y)| (y / PATCH, x / PATCH))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Slot-wise cosine similarity between the reference-view token grid and the
/// (optionally fused) token grid at `theta_deg`.
pub fn token_heatmap(
    fusion: Option<&FusionModule>,
    encoder: &EncoderSpec,
    scene: &Scene,
    gripper: Vec2,
    theta_deg: f64,
) -> Result<HeatmapResult> {
    if theta_deg.abs() > 90.0 {
        return Err(Error::InvalidConfig(format!(
            "heatmap angle {theta_deg} outside [-90, 90]"
        )));
    }
    let z_ref = encode(encoder, &render(scene, gripper, &ViewSpec::reference())).into_vec();
    let z_aux = encode(encoder, &render(scene, gripper, &ViewSpec::new(theta_deg)?)).into_vec();
    let z_aux = match fusion {
        Some(f) => f.fuse_slice(&z_aux)?,
        None => z_aux,
    };
    let (a, b) = (token_view_slice(&z_ref), token_view_slice(&z_aux));
    let mut grid = [[0.0; GRID]; GRID];
    let mut degenerate = Vec::new();
    for (r, row) in grid.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            match cosine_similarity(a.token(r, c), b.token(r, c)) {
                Some(s) => *cell = s,
                None => degenerate.push((r, c)),
            }
        }
    }
    Ok(HeatmapResult {
        grid,
        theta_deg,
        scene_seed: scene.seed,
        fused: fusion.is_some(),
        degenerate,
    })
}
