//! Training recipes: the three-stage fusion pipeline, the two comparison
//! baselines and the ablation runner.
//!
//! Stage 1 fits the policy on reference-view latents. Stage 2 freezes the
//! policy and fits the fusion module on paired latents, unlocking auxiliary
//! views through a [`Curriculum`]. Stage 3 trains both jointly on the sum of
//! action and alignment losses.

mod ablation;
mod curriculum;
mod data;
mod stages;

pub use ablation::{
    run_ablations, AblationArm, AblationReport, ArmOutcome, SeedOutcome, PAPER_REFERENCE,
    TABLE_TITLES,
};
pub use curriculum::Curriculum;
pub use data::{encode_pairs, encode_split, EncodedPairs, EncodedSplit, PreparedData};
pub use stages::{
    stage1_action_only, stage2_fusion_only, stage3_joint, train_baseline_mixed,
    train_baseline_reference, train_lpaf,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::{AlignKind, FusionModule};
use crate::policy::PolicyParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub stage3_epochs: usize,
    pub batch_size: usize,
    /// Learning rate for stages 1 and 2 and for the baselines.
    pub lr: f64,
    pub lr_stage3: f64,
    pub align_kind: AlignKind,
    pub progressive: bool,
    pub freeze_policy_stage3: bool,
    /// Weight of the alignment term in the joint stage.
    pub align_weight: f64,
    /// Share of each fusion batch made of (reference, reference) identity pairs.
    pub reference_pair_fraction: f64,
    pub seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            stage1_epochs: 40,
            stage2_epochs: 60,
            stage3_epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            lr_stage3: 3e-4,
            align_kind: AlignKind::Cos,
            progressive: true,
            freeze_policy_stage3: false,
            align_weight: 1.0,
            reference_pair_fraction: 0.1,
            seed: 0,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if [self.lr, self.lr_stage3]
            .iter()
            .any(|lr| lr.is_nan() || *lr <= 0.0)
        {
            return Err(Error::InvalidConfig(
                "learning rates must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.reference_pair_fraction) {
            return Err(Error::InvalidConfig(
                "reference pair fraction must be in [0, 1)".into(),
            ));
        }
        if self.align_weight.is_nan() || self.align_weight < 0.0 {
            return Err(Error::InvalidConfig(
                "alignment weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Lpaf,
    RefOnly,
    Mixed,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Lpaf => "lpaf",
            Arm::RefOnly => "ref-only",
            Arm::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lpaf" => Ok(Arm::Lpaf),
            "ref-only" => Ok(Arm::RefOnly),
            "mixed" => Ok(Arm::Mixed),
            other => Err(Error::InvalidConfig(format!("unknown arm {other:?}"))),
        }
    }
}

/// Per-epoch mean losses. Missing components are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub stage: u8,
    pub epoch: usize,
    pub action_loss: Option<f64>,
    pub align_loss: Option<f64>,
}

/// Joint-stage loss components of one batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub action: f64,
    pub align: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub arm: Arm,
    pub config: StageConfig,
    /// `(split name, sha256 of its serialized form)`
    pub datasets: Vec<(String, String)>,
    pub encoder_seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrainedBundle {
    pub policy: PolicyParams,
    pub fusion: Option<FusionModule>,
    pub provenance: Provenance,
    pub curves: Vec<LossRecord>,
    pub stage3_batches: Vec<BatchRecord>,
}

impl TrainedBundle {
    pub fn arm(&self) -> Arm {
        self.provenance.arm
    }

    /// SHA-256 over parameter digests and provenance.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.policy.digest());
        if let Some(f) = &self.fusion {
            h.update(f.digest());
        }
        h.update(serde_json::to_vec(&self.provenance).expect("provenance serializes"));
        hex::encode(h.finalize())
    }
}

fn check_loss(loss: f64, stage: u8, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!(
            "non-finite loss in stage {stage} epoch {epoch}"
        )))
    }
}
