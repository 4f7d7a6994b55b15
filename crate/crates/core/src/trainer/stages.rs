use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    check_loss, Arm, BatchRecord, Curriculum, EncodedSplit, LossRecord, PreparedData, Provenance,
    StageConfig, TrainedBundle,
};
use crate::error::{Error, Result};
use crate::fusion::{alignment_terms, FusionModule};
use crate::nncore::{adam_step, AdamConfig, OptState};
use crate::policy::{action_loss_with, PolicyParams};
use crate::seed::{self, tag};

fn shuffled(n: usize, keys: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(keys));
    idx
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Behavior cloning on raw latents; shared by stage 1 and both baselines.
fn fit_policy(
    policy: &mut PolicyParams,
    split: &EncodedSplit,
    cfg: &StageConfig,
    epochs: usize,
    stage: u8,
) -> Result<Vec<LossRecord>> {
    if split.is_empty() {
        return Err(Error::InvalidConfig(
            "behavior cloning needs a non-empty split".into(),
        ));
    }
    let mut opt = OptState::new(policy.mlp(), AdamConfig::with_lr(cfg.lr));
    let mut curves = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let order = shuffled(
            split.len(),
            &[cfg.seed, tag::SHUFFLE, stage as u64, epoch as u64],
        );
        let mut losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let z = split.latents.select(Axis(0), chunk);
            let a = split.actions.select(Axis(0), chunk);
            let tasks: Vec<usize> = chunk.iter().map(|&i| split.tasks[i]).collect();
            let out = action_loss_with(policy, z.view(), &tasks, a.view(), false)?;
            check_loss(out.loss, stage, epoch)?;
            adam_step(policy.mlp_mut(), &out.grads, &mut opt)?;
            losses.push(out.loss);
        }
        curves.push(LossRecord {
            stage,
            epoch,
            action_loss: Some(mean(&losses)),
            align_loss: None,
        });
    }
    Ok(curves)
}

/// Stage 1: policy trained on reference-view steps only; the encoder is fixed
/// and no fusion module exists yet.
pub fn stage1_action_only(
    cfg: &StageConfig,
    d_r: &EncodedSplit,
) -> Result<(PolicyParams, Vec<LossRecord>)> {
    cfg.validate()?;
    let mut policy = PolicyParams::new(cfg.seed);
    let curves = fit_policy(&mut policy, d_r, cfg, cfg.stage1_epochs, 1)?;
    Ok((policy, curves))
}

/// Stage 2: only the fusion parameters move. Each epoch walks the paired
/// states whose view is active in the curriculum; every batch also carries a
/// share of (reference, reference) pairs with identity targets.
pub fn stage2_fusion_only(
    cfg: &StageConfig,
    mut fusion: FusionModule,
    data: &PreparedData,
) -> Result<(FusionModule, Vec<LossRecord>)> {
    cfg.validate()?;
    let pairs = &data.pairs;
    if pairs.is_empty() {
        return Err(Error::InvalidConfig(
            "fusion training needs paired states".into(),
        ));
    }
    let curriculum = if cfg.progressive {
        Curriculum::progressive(&data.aux_views, cfg.stage2_epochs)
    } else {
        Curriculum::one_pass(&data.aux_views, cfg.stage2_epochs)
    };
    let reference = &data.reference.latents;
    let n_ref = if reference.nrows() == 0 {
        0
    } else {
        ((cfg.batch_size as f64 * cfg.reference_pair_fraction).round() as usize)
            .min(cfg.batch_size - 1)
    };
    let n_aux = cfg.batch_size - n_ref;

    let mut opt = OptState::new(fusion.mlp(), AdamConfig::with_lr(cfg.lr));
    let mut curves = Vec::with_capacity(cfg.stage2_epochs);
    for epoch in 0..cfg.stage2_epochs {
        let active = curriculum.active_set(epoch);
        let mut idx: Vec<usize> = (0..pairs.len())
            .filter(|&i| active.contains(&pairs.thetas[i]))
            .collect();
        if idx.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "no paired states for active views {active:?}"
            )));
        }
        idx.shuffle(&mut seed::rng(&[cfg.seed, tag::SHUFFLE, 2, epoch as u64]));
        let mut ref_rng = seed::rng(&[cfg.seed, tag::REF_PAIRS, epoch as u64]);
        let mut losses = Vec::new();
        for chunk in idx.chunks(n_aux) {
            let picks: Vec<usize> = (0..n_ref)
                .map(|_| ref_rng.gen_range(0..reference.nrows()))
                .collect();
            let identity = reference.select(Axis(0), &picks);
            let input = ndarray::concatenate(
                Axis(0),
                &[pairs.aux.select(Axis(0), chunk).view(), identity.view()],
            )
            .expect("equal widths");
            let target = ndarray::concatenate(
                Axis(0),
                &[
                    pairs.reference.select(Axis(0), chunk).view(),
                    identity.view(),
                ],
            )
            .expect("equal widths");
            let (fused, cache) = fusion.forward(input.view())?;
            let (loss, grad) = alignment_terms(cfg.align_kind, fused.view(), target.view())?;
            check_loss(loss, 2, epoch)?;
            let (grads, _) = fusion.backward(&cache, grad.view(), false)?;
            adam_step(fusion.mlp_mut(), &grads, &mut opt)?;
            losses.push(loss);
        }
        curves.push(LossRecord {
            stage: 2,
            epoch,
            action_loss: None,
            align_loss: Some(mean(&losses)),
        });
    }
    Ok((fusion, curves))
}

/// Stage 3: every observation (reference and auxiliary) goes through the
/// fusion module into the policy; the loss is action loss plus the weighted
/// alignment loss on rows that have a paired reference latent.
pub fn stage3_joint(
    cfg: &StageConfig,
    mut policy: PolicyParams,
    mut fusion: FusionModule,
    data: &PreparedData,
) -> Result<TrainedBundle> {
    cfg.validate()?;
    let (r, m) = (&data.reference, &data.multiview);
    if m.len() != data.pairs.len() {
        return Err(Error::InvalidConfig(
            "multiview steps and paired states are misaligned".into(),
        ));
    }
    let total = r.len() + m.len();
    let mut policy_opt = OptState::new(policy.mlp(), AdamConfig::with_lr(cfg.lr_stage3));
    let mut fusion_opt = OptState::new(fusion.mlp(), AdamConfig::with_lr(cfg.lr_stage3));
    let mut curves = Vec::new();
    let mut batches = Vec::new();
    let dim = fusion.dim();

    for epoch in 0..cfg.stage3_epochs {
        let order = shuffled(total, &[cfg.seed, tag::SHUFFLE, 3, epoch as u64]);
        let (mut act_sum, mut align_sum, mut count) = (0.0, 0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let mut z = Array2::zeros((b, dim));
            let mut actions = Array2::zeros((b, 2));
            let mut tasks = Vec::with_capacity(b);
            let mut paired_rows = Vec::new();
            let mut paired_src = Vec::new();
            for (row, &i) in chunk.iter().enumerate() {
                let (split, k) = if i < r.len() {
                    (r, i)
                } else {
                    (m, i - r.len())
                };
                z.row_mut(row).assign(&split.latents.row(k));
                actions.row_mut(row).assign(&split.actions.row(k));
                tasks.push(split.tasks[k]);
                if i >= r.len() {
                    paired_rows.push(row);
                    paired_src.push(k);
                }
            }
            let (fused, cache) = fusion.forward(z.view())?;
            let act = action_loss_with(&policy, fused.view(), &tasks, actions.view(), true)?;
            let mut grad_fused = act.grad_z;
            let mut align = 0.0;
            if !paired_rows.is_empty() {
                let pred = fused.select(Axis(0), &paired_rows);
                let target = data.pairs.reference.select(Axis(0), &paired_src);
                let (l, g) = alignment_terms(cfg.align_kind, pred.view(), target.view())?;
                align = l;
                for (gi, &row) in paired_rows.iter().enumerate() {
                    grad_fused
                        .row_mut(row)
                        .scaled_add(cfg.align_weight, &g.slice(s![gi, ..]));
                }
            }
            let total_loss = act.loss + cfg.align_weight * align;
            check_loss(total_loss, 3, epoch)?;
            let (fusion_grads, _) = fusion.backward(&cache, grad_fused.view(), false)?;
            if !cfg.freeze_policy_stage3 {
                adam_step(policy.mlp_mut(), &act.grads, &mut policy_opt)?;
            }
            adam_step(fusion.mlp_mut(), &fusion_grads, &mut fusion_opt)?;
            batches.push(BatchRecord {
                epoch,
                action: act.loss,
                align,
                total: total_loss,
            });
            act_sum += act.loss;
            align_sum += align;
            count += 1;
        }
        curves.push(LossRecord {
            stage: 3,
            epoch,
            action_loss: Some(act_sum / count as f64),
            align_loss: Some(align_sum / count as f64),
        });
    }
    Ok(TrainedBundle {
        policy,
        fusion: Some(fusion),
        provenance: Provenance {
            arm: Arm::Lpaf,
            config: cfg.clone(),
            datasets: data.digests_for(&["d_r", "d_m"]),
            encoder_seed: data.encoder.seed(),
        },
        curves,
        stage3_batches: batches,
    })
}

/// The full three-stage pipeline.
pub fn train_lpaf(cfg: &StageConfig, data: &PreparedData) -> Result<TrainedBundle> {
    let (policy, mut curves) = stage1_action_only(cfg, &data.reference)?;
    let fusion = FusionModule::new(cfg.seed);
    let (fusion, stage2) = stage2_fusion_only(cfg, fusion, data)?;
    curves.extend(stage2);
    let mut bundle = stage3_joint(cfg, policy, fusion, data)?;
    curves.append(&mut bundle.curves);
    bundle.curves = curves;
    Ok(bundle)
}

fn baseline(
    cfg: &StageConfig,
    split: &EncodedSplit,
    arm: Arm,
    datasets: Vec<(String, String)>,
    encoder_seed: u64,
) -> Result<TrainedBundle> {
    cfg.validate()?;
    let mut policy = PolicyParams::new(cfg.seed);
    let curves = fit_policy(&mut policy, split, cfg, cfg.stage1_epochs, 1)?;
    Ok(TrainedBundle {
        policy,
        fusion: None,
        provenance: Provenance {
            arm,
            config: cfg.clone(),
            datasets,
            encoder_seed,
        },
        curves,
        stage3_batches: Vec::new(),
    })
}

/// Behavior cloning on the equal-budget reference-only set.
pub fn train_baseline_reference(cfg: &StageConfig, data: &PreparedData) -> Result<TrainedBundle> {
    let large = data.reference_large.as_ref().ok_or_else(|| {
        Error::InvalidConfig("reference baseline needs the enlarged reference set".into())
    })?;
    if large.thetas.iter().any(|&t| t != 0.0) {
        return Err(Error::InvalidConfig(
            "reference baseline data must come from the reference view".into(),
        ));
    }
    baseline(
        cfg,
        large,
        Arm::RefOnly,
        data.digests_for(&["d_r_large"]),
        data.encoder.seed(),
    )
}

/// Behavior cloning directly on raw latents of `D_R ∪ D_M`, no fusion.
pub fn train_baseline_mixed(cfg: &StageConfig, data: &PreparedData) -> Result<TrainedBundle> {
    let mixed = data.reference.concat(&data.multiview);
    baseline(
        cfg,
        &mixed,
        Arm::Mixed,
        data.digests_for(&["d_r", "d_m"]),
        data.encoder.seed(),
    )
}
