use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    expert_path, generate_trajectory, render, sample_scene, Image, Scene, Trajectory, Vec2,
    ViewSpec, DEFAULT_HORIZON, TASK_COUNT,
};
use crate::error::{Error, Result};
use crate::seed::{self, angle_key, tag};

/// Viewpoint sampling protocol: a reference view at 0° plus `v` auxiliary
/// views placed symmetrically at multiples of `a_deg`, `s` tasks and `j`
/// trajectories per (task, view).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProtocol {
    pub a_deg: f64,
    pub v: usize,
    pub s: usize,
    pub j: usize,
    pub seed: u64,
    pub horizon: usize,
}

impl Default for DatasetProtocol {
    fn default() -> Self {
        DatasetProtocol {
            a_deg: 45.0,
            v: 4,
            s: 3,
            j: 28,
            seed: 0,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl DatasetProtocol {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.a_deg.is_nan() || self.a_deg <= 0.0 {
            return bad(format!(
                "angular interval must be positive, got {}",
                self.a_deg
            ));
        }
        if !self.v.is_multiple_of(2) {
            return bad(format!("auxiliary view count must be even, got {}", self.v));
        }
        if (self.v / 2) as f64 * self.a_deg >= 180.0 {
            return bad("auxiliary views wrap past 180°".into());
        }
        if self.s == 0 || self.s > TASK_COUNT {
            return bad(format!(
                "task count must be in 1..={TASK_COUNT}, got {}",
                self.s
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        Ok(())
    }

    /// Auxiliary angles, ascending: `-k·a, …, -a, a, …, k·a`.
    pub fn aux_views(&self) -> Vec<f64> {
        let k = self.v / 2;
        let neg = (1..=k).rev().map(|i| -(i as f64) * self.a_deg);
        let pos = (1..=k).map(|i| i as f64 * self.a_deg);
        neg.chain(pos).collect()
    }

    /// `(v + 1) · s · j`
    pub fn total_trajectories(&self) -> usize {
        (self.v + 1) * self.s * self.j
    }
}

/// One world state rendered from the reference view and an auxiliary view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedState {
    pub scene: Scene,
    pub gripper: Vec2,
    pub reference: Image,
    pub auxiliary: Image,
    pub theta_deg: f64,
}

impl PairedState {
    pub fn new(scene: &Scene, gripper: Vec2, theta_deg: f64) -> Result<Self> {
        let view = ViewSpec::new(theta_deg)?;
        Ok(PairedState {
            scene: scene.clone(),
            gripper,
            reference: render(scene, gripper, &ViewSpec::reference()),
            auxiliary: render(scene, gripper, &view),
            theta_deg,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub paired_states: Vec<PairedState>,
}

impl Dataset {
    pub fn step_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Concatenation of two splits, `self` first.
    pub fn union(&self, other: &Dataset) -> Dataset {
        Dataset {
            trajectories: self
                .trajectories
                .iter()
                .chain(&other.trajectories)
                .cloned()
                .collect(),
            paired_states: self
                .paired_states
                .iter()
                .chain(&other.paired_states)
                .cloned()
                .collect(),
        }
    }
}

fn trajectory_seed(protocol_seed: u64, task: usize, theta: f64, index: usize) -> u64 {
    seed::derive(&[
        protocol_seed,
        tag::TRAJECTORY,
        task as u64,
        angle_key(theta),
        index as u64,
    ])
}

fn collect_trajectories(
    protocol: &DatasetProtocol,
    keys: Vec<(f64, usize, usize)>,
) -> Result<Vec<Trajectory>> {
    keys.into_par_iter()
        .map(|(theta, task, index)| {
            let scene = sample_scene(task, trajectory_seed(protocol.seed, task, theta, index))?;
            generate_trajectory(&scene, &ViewSpec::new(theta)?, protocol.horizon)
        })
        .collect()
}

/// Reference-view trajectories with `per_task` demonstrations per task.
/// Index `i` of task `t` is identical across calls, so a larger set extends a
/// smaller one.
pub fn build_reference_set(protocol: &DatasetProtocol, per_task: usize) -> Result<Dataset> {
    protocol.validate()?;
    let keys = (0..protocol.s)
        .flat_map(|task| (0..per_task).map(move |i| (0.0, task, i)))
        .collect();
    Ok(Dataset {
        trajectories: collect_trajectories(protocol, keys)?,
        paired_states: Vec::new(),
    })
}

/// Builds the reference split `D_R` (`s·j` trajectories at 0°) and the
/// auxiliary split `D_M` (`v·s·j` trajectories) with a paired reference
/// render for every auxiliary step.
pub fn build_datasets(protocol: &DatasetProtocol) -> Result<(Dataset, Dataset)> {
    let reference = build_reference_set(protocol, protocol.j)?;
    let keys = protocol
        .aux_views()
        .into_iter()
        .flat_map(|theta| {
            (0..protocol.s).flat_map(move |task| (0..protocol.j).map(move |i| (theta, task, i)))
        })
        .collect();
    let trajectories = collect_trajectories(protocol, keys)?;
    let paired_states = trajectories
        .par_iter()
        .map(|traj| {
            let scene = sample_scene(traj.task_id, traj.scene_seed)?;
            traj.steps
                .iter()
                .map(|st| {
                    Ok(PairedState {
                        scene: scene.clone(),
                        gripper: st.gripper,
                        reference: render(&scene, st.gripper, &ViewSpec::reference()),
                        auxiliary: st.image.clone(),
                        theta_deg: traj.view.theta_deg,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok((
        reference,
        Dataset {
            trajectories,
            paired_states,
        },
    ))
}

/// Paired states on fresh scenes, never drawn by [`build_datasets`]. The
/// gripper sits at a uniformly chosen state of the expert path.
pub fn heldout_pairs(seed: u64, thetas: &[f64], per_view: usize) -> Result<Vec<PairedState>> {
    let keys: Vec<(f64, usize)> = thetas
        .iter()
        .flat_map(|&t| (0..per_view).map(move |k| (t, k)))
        .collect();
    keys.into_par_iter()
        .map(|(theta, k)| {
            let mut rng = seed::rng(&[seed, tag::HELDOUT, angle_key(theta), k as u64]);
            let task = k % TASK_COUNT;
            let scene = sample_scene(task, rng.gen())?;
            let path = expert_path(&scene, DEFAULT_HORIZON);
            let gripper = path[rng.gen_range(0..path.len())];
            PairedState::new(&scene, gripper, theta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(v: usize, j: usize) -> DatasetProtocol {
        DatasetProtocol {
            v,
            j,
            ..DatasetProtocol::default()
        }
    }

    #[test]
    fn default_views_and_counts() {
        let p = DatasetProtocol::default();
        assert_eq!(p.aux_views(), vec![-90.0, -45.0, 45.0, 90.0]);
        assert_eq!(p.total_trajectories(), 420);
    }

    #[test]
    fn counts_follow_protocol() {
        let p = small(4, 2);
        let (r, m) = build_datasets(&p).unwrap();
        assert_eq!(r.trajectories.len(), 6);
        assert_eq!(m.trajectories.len(), 24);
        assert_eq!(
            r.trajectories.len() + m.trajectories.len(),
            p.total_trajectories()
        );
        assert_eq!(m.paired_states.len(), m.step_count());
        assert!(r
            .trajectories
            .iter()
            .all(|t| t.view.is_reference() && t.success));
    }

    #[test]
    fn no_aux_views_gives_empty_multiview_split() {
        let (r, m) = build_datasets(&small(0, 3)).unwrap();
        assert_eq!(r.trajectories.len(), 9);
        assert!(m.is_empty() && m.paired_states.is_empty());
    }

    #[test]
    fn pairs_render_the_same_state() {
        let (_, m) = build_datasets(&small(2, 1)).unwrap();
        for p in &m.paired_states {
            assert_eq!(
                p.reference,
                render(&p.scene, p.gripper, &ViewSpec::reference())
            );
            assert_eq!(
                p.auxiliary,
                render(&p.scene, p.gripper, &ViewSpec::new(p.theta_deg).unwrap())
            );
        }
    }

    #[test]
    fn larger_reference_set_extends_smaller() {
        let p = small(4, 2);
        let a = build_reference_set(&p, 2).unwrap();
        let b = build_reference_set(&p, 5).unwrap();
        for task in 0..p.s {
            for i in 0..2 {
                assert_eq!(a.trajectories[task * 2 + i], b.trajectories[task * 5 + i]);
            }
        }
    }

    #[test]
    fn invalid_protocols() {
        assert!(small(3, 1).validate().is_err());
        assert!(DatasetProtocol {
            s: 4,
            ..small(2, 1)
        }
        .validate()
        .is_err());
        assert!(DatasetProtocol {
            a_deg: 90.0,
            ..small(4, 1)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn heldout_is_deterministic() {
        let a = heldout_pairs(3, &[30.0, 45.0], 4).unwrap();
        let b = heldout_pairs(3, &[30.0, 45.0], 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
    }
}
