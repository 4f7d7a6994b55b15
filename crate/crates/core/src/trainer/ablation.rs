use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stage1_action_only, stage2_fusion_only, stage3_joint, PreparedData, StageConfig};
use crate::error::{Error, Result};
use crate::evalkit::{sweep, SweepResult, SweepSpec};
use crate::fusion::{AlignKind, FusionModule};
use crate::policy::PolicyParams;

/// One row of one ablation table; every row changes a single factor
/// relative to its table-mate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AblationArm {
    pub table: usize,
    pub id: &'static str,
    pub label: &'static str,
    pub align_kind: AlignKind,
    pub progressive: bool,
    pub freeze: bool,
}

const fn arm(
    table: usize,
    id: &'static str,
    label: &'static str,
    align_kind: AlignKind,
    progressive: bool,
    freeze: bool,
) -> AblationArm {
    AblationArm {
        table,
        id,
        label,
        align_kind,
        progressive,
        freeze,
    }
}

impl AblationArm {
    pub const ALL: [AblationArm; 6] = [
        arm(0, "t0-cos", "COS", AlignKind::Cos, false, false),
        arm(0, "t0-mse", "MSE", AlignKind::Mse, false, false),
        arm(
            1,
            "t1-one-pass",
            "w/o gradually",
            AlignKind::Cos,
            false,
            false,
        ),
        arm(
            1,
            "t1-progressive",
            "w/ gradually",
            AlignKind::Cos,
            true,
            false,
        ),
        arm(2, "t2-freeze", "w/ freeze", AlignKind::Cos, true, true),
        arm(2, "t2-unfreeze", "w/o freeze", AlignKind::Cos, true, false),
    ];

    fn key(&self) -> (AlignKind, bool, bool) {
        (self.align_kind, self.progressive, self.freeze)
    }

    pub fn config(&self, base: &StageConfig, seed: u64) -> StageConfig {
        StageConfig {
            align_kind: self.align_kind,
            progressive: self.progressive,
            freeze_policy_stage3: self.freeze,
            seed,
            ..base.clone()
        }
    }
}

pub const TABLE_TITLES: [&str; 3] = [
    "loss configuration",
    "progressive involvement",
    "policy freezing in stage 3",
];

/// Published mean success rates (%) per arm, in [`AblationArm::ALL`] order.
pub const PAPER_REFERENCE: [f64; 6] = [86.42, 84.26, 86.42, 87.79, 88.63, 88.84];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Uniform mean over swept viewpoints, or the failure message.
    pub mean_success: std::result::Result<f64, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub arm: AblationArm,
    pub seeds: Vec<SeedOutcome>,
}

impl ArmOutcome {
    pub fn completed(&self) -> bool {
        self.seeds.iter().all(|s| s.mean_success.is_ok())
    }

    /// Mean over the seeds that completed.
    pub fn mean(&self) -> Option<f64> {
        let ok: Vec<f64> = self
            .seeds
            .iter()
            .filter_map(|s| s.mean_success.clone().ok())
            .collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub arms: Vec<ArmOutcome>,
    /// Per-(configuration, seed) sweeps, labelled with the first arm id using
    /// that configuration.
    pub sweeps: Vec<SweepResult>,
}

impl AblationReport {
    pub fn arm(&self, id: &str) -> Option<&ArmOutcome> {
        self.arms.iter().find(|a| a.arm.id == id)
    }

    /// Plain-text tables, one per ablation, with the published value next to
    /// each measured one. The last line of each table states whether the
    /// ordering of the two rows agrees with the published ordering.
    pub fn render(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("failed".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let mut s = String::new();
        for (t, title) in TABLE_TITLES.iter().enumerate() {
            writeln!(s, "Table {t}: {title}").unwrap();
            writeln!(s, "{:<16} {:>12} {:>12}", "setting", "success", "paper").unwrap();
            let rows: Vec<(usize, &ArmOutcome)> = self
                .arms
                .iter()
                .enumerate()
                .filter(|(_, a)| a.arm.table == t)
                .collect();
            for &(i, a) in &rows {
                writeln!(
                    s,
                    "{:<16} {:>12} {:>11.2}%",
                    a.arm.label,
                    pct(a.mean()),
                    PAPER_REFERENCE[i]
                )
                .unwrap();
            }
            if let [(i, a), (j, b)] = rows[..] {
                let paper = PAPER_REFERENCE[i] > PAPER_REFERENCE[j];
                let verdict = match (a.mean(), b.mean()) {
                    (Some(x), Some(y)) if x == y => "tie".to_string(),
                    (Some(x), Some(y)) => {
                        if (x > y) == paper {
                            "agrees".to_string()
                        } else {
                            "disagrees".to_string()
                        }
                    }
                    _ => "n/a".to_string(),
                };
                writeln!(s, "direction vs paper: {verdict}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

type Stage2Key = (AlignKind, bool);

/// Runs every arm of [`AblationArm::ALL`] for each seed. Stage 1 is trained
/// once per seed and stage 2 once per (alignment, curriculum) pair; arms
/// with identical configurations share one run. A failing run is recorded
/// in its arms, not propagated.
pub fn run_ablations(
    base: &StageConfig,
    data: &PreparedData,
    seeds: &[u64],
    spec: &SweepSpec,
) -> Result<AblationReport> {
    base.validate()?;
    spec.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "ablations need at least one seed".into(),
        ));
    }

    let stage1: Vec<Result<PolicyParams>> = seeds
        .par_iter()
        .map(|&seed| {
            stage1_action_only(
                &StageConfig {
                    seed,
                    ..base.clone()
                },
                &data.reference,
            )
            .map(|(p, _)| p)
        })
        .collect();

    let mut s2_keys: Vec<Stage2Key> = Vec::new();
    for a in AblationArm::ALL {
        if !s2_keys.contains(&(a.align_kind, a.progressive)) {
            s2_keys.push((a.align_kind, a.progressive));
        }
    }
    let s2_jobs: Vec<(usize, Stage2Key)> = (0..seeds.len())
        .flat_map(|i| s2_keys.iter().map(move |&k| (i, k)))
        .collect();
    let stage2: Vec<Result<FusionModule>> = s2_jobs
        .par_iter()
        .map(|&(i, (kind, progressive))| {
            stage1[i]
                .as_ref()
                .map_err(|e| Error::InvalidConfig(format!("stage 1 failed: {e}")))?;
            let cfg = StageConfig {
                align_kind: kind,
                progressive,
                seed: seeds[i],
                ..base.clone()
            };
            stage2_fusion_only(&cfg, FusionModule::new(seeds[i]), data).map(|(f, _)| f)
        })
        .collect();

    let mut unique: Vec<AblationArm> = Vec::new();
    for a in AblationArm::ALL {
        if !unique.iter().any(|u| u.key() == a.key()) {
            unique.push(a);
        }
    }
    let s3_jobs: Vec<(usize, AblationArm)> = (0..seeds.len())
        .flat_map(|i| unique.iter().map(move |&a| (i, a)))
        .collect();
    let runs: Vec<std::result::Result<SweepResult, String>> = s3_jobs
        .par_iter()
        .map(|&(i, a)| {
            let run = || -> Result<SweepResult> {
                let policy = stage1[i]
                    .as_ref()
                    .map_err(|e| Error::InvalidConfig(format!("stage 1 failed: {e}")))?;
                let s2 = s2_jobs
                    .iter()
                    .position(|&(si, k)| si == i && k == (a.align_kind, a.progressive))
                    .expect("stage 2 scheduled for every arm");
                let fusion = stage2[s2]
                    .as_ref()
                    .map_err(|e| Error::InvalidConfig(format!("stage 2 failed: {e}")))?;
                let bundle = stage3_joint(
                    &a.config(base, seeds[i]),
                    policy.clone(),
                    fusion.clone(),
                    data,
                )?;
                let mut r = sweep(&bundle, spec)?;
                r.arm = a.id.to_string();
                Ok(r)
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let by_key: BTreeMap<(usize, usize), &std::result::Result<SweepResult, String>> = s3_jobs
        .iter()
        .zip(&runs)
        .map(|(&(i, a), r)| {
            (
                (i, unique.iter().position(|u| u.key() == a.key()).unwrap()),
                r,
            )
        })
        .collect();
    let arms = AblationArm::ALL
        .iter()
        .map(|a| {
            let u = unique.iter().position(|x| x.key() == a.key()).unwrap();
            ArmOutcome {
                arm: *a,
                seeds: seeds
                    .iter()
                    .enumerate()
                    .map(|(i, &seed)| SeedOutcome {
                        seed,
                        mean_success: match by_key[&(i, u)] {
                            Ok(r) => r.mean_success(None).map_err(|e| e.to_string()),
                            Err(e) => Err(e.clone()),
                        },
                    })
                    .collect(),
            }
        })
        .collect();
    let sweeps = runs.into_iter().filter_map(|r| r.ok()).collect();
    Ok(AblationReport { arms, sweeps })
}
