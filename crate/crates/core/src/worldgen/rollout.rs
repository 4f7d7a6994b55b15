use serde::{Deserialize, Serialize};

use super::{
    clamp_step, distance, render, Image, Scene, Vec2, ViewSpec, SUCCESS_RADIUS, WORKSPACE_LIMIT,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub image: Image,
    pub gripper: Vec2,
    pub action: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: usize,
    pub view: ViewSpec,
    /// Seed the scene was sampled from; `sample_scene(task_id, scene_seed)` rebuilds it.
    pub scene_seed: u64,
    pub steps: Vec<Step>,
    pub success: bool,
}

/// What a controller sees at one step. `scene` and `gripper` are the
/// privileged ground-truth state; learned controllers must only read `image`.
pub struct Observation<'a> {
    pub image: &'a Image,
    pub task_id: usize,
    pub scene: &'a Scene,
    pub gripper: Vec2,
}

pub trait Controller {
    fn action(&self, obs: &Observation<'_>) -> Result<Vec2>;
}

impl<F> Controller for F
where
    F: Fn(&Observation<'_>) -> Vec2,
{
    fn action(&self, obs: &Observation<'_>) -> Result<Vec2> {
        Ok(self(obs))
    }
}

/// The scripted expert, reading ground truth.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpertController;

impl Controller for ExpertController {
    fn action(&self, obs: &Observation<'_>) -> Result<Vec2> {
        Ok(expert_action(obs.scene, obs.gripper))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub success: bool,
    pub steps_taken: usize,
}

/// Clamped straight-line displacement toward the target, in world frame.
pub fn expert_action(scene: &Scene, gripper: Vec2) -> Vec2 {
    let t = scene.target().center;
    clamp_step([t[0] - gripper[0], t[1] - gripper[1]])
}

fn reached(scene: &Scene, gripper: Vec2) -> bool {
    distance(gripper, scene.target().center) < SUCCESS_RADIUS
}

fn advance(gripper: Vec2, action: Vec2) -> Vec2 {
    [
        (gripper[0] + action[0]).clamp(-WORKSPACE_LIMIT, WORKSPACE_LIMIT),
        (gripper[1] + action[1]).clamp(-WORKSPACE_LIMIT, WORKSPACE_LIMIT),
    ]
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Gripper positions visited by the expert before reaching the target
/// (the states at which an action is taken).
pub fn expert_path(scene: &Scene, horizon: usize) -> Vec<Vec2> {
    let mut g = scene.gripper_start;
    let mut path = Vec::new();
    while path.len() < horizon && !reached(scene, g) {
        path.push(g);
        g = advance(g, expert_action(scene, g));
    }
    path
}

/// Rolls the expert forward from the scene's start, rendering every visited
/// state from `view`.
pub fn generate_trajectory(scene: &Scene, view: &ViewSpec, horizon: usize) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let mut g = scene.gripper_start;
    let mut steps = Vec::new();
    while steps.len() < horizon && !reached(scene, g) {
        let action = expert_action(scene, g);
        steps.push(Step {
            image: render(scene, g, view),
            gripper: g,
            action,
        });
        g = advance(g, action);
    }
    if !reached(scene, g) {
        return Err(Error::ExpertFailure {
            seed: scene.seed,
            horizon,
        });
    }
    Ok(Trajectory {
        task_id: scene.task_id,
        view: *view,
        scene_seed: scene.seed,
        steps,
        success: true,
    })
}

/// Closed-loop episode driven by `controller`. Actions are clipped to the
/// per-step limit and applied in world frame.
pub fn simulate_rollout(
    controller: &dyn Controller,
    scene: &Scene,
    view: &ViewSpec,
    horizon: usize,
) -> Result<RolloutOutcome> {
    check_horizon(horizon)?;
    let mut g = scene.gripper_start;
    let mut steps_taken = 0;
    while steps_taken < horizon && !reached(scene, g) {
        let image = render(scene, g, view);
        let obs = Observation {
            image: &image,
            task_id: scene.task_id,
            scene,
            gripper: g,
        };
        let a = controller.action(&obs)?;
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::ControllerFault(a));
        }
        g = advance(g, clamp_step(a));
        steps_taken += 1;
    }
    Ok(RolloutOutcome {
        success: reached(scene, g),
        steps_taken,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{sample_scene, Anchor, Disc, PaletteColor, MAX_STEP};
    use proptest::prelude::*;

    fn scene_with_target(target: Vec2) -> Scene {
        Scene {
            objects: vec![Disc {
                center: target,
                radius: 0.1,
                color: PaletteColor::Red,
            }],
            anchor: Anchor::FIXED,
            gripper_start: [-0.7, -0.7],
            task_id: 0,
            seed: 0,
        }
    }

    #[test]
    fn expert_at_target_is_still() {
        let s = scene_with_target([0.3, 0.2]);
        assert_eq!(expert_action(&s, [0.3, 0.2]), [0.0, 0.0]);
    }

    #[test]
    fn expert_saturates() {
        let s = scene_with_target([1.0, 0.0]);
        assert_eq!(expert_action(&s, [0.0, 0.0]), [0.1, 0.0]);
    }

    #[test]
    fn expert_ignores_view() {
        let s = sample_scene(1, 3).unwrap();
        let a = Observation {
            image: &render(&s, s.gripper_start, &ViewSpec::reference()),
            task_id: 1,
            scene: &s,
            gripper: s.gripper_start,
        };
        let b = Observation {
            image: &render(&s, s.gripper_start, &ViewSpec::new(90.0).unwrap()),
            ..a
        };
        assert_eq!(
            ExpertController.action(&a).unwrap(),
            ExpertController.action(&b).unwrap()
        );
    }

    #[test]
    fn zero_horizon_rejected() {
        let s = sample_scene(0, 1).unwrap();
        assert!(generate_trajectory(&s, &ViewSpec::reference(), 0).is_err());
        assert!(simulate_rollout(&ExpertController, &s, &ViewSpec::reference(), 0).is_err());
    }

    #[test]
    fn trajectories_are_deterministic() {
        let s = sample_scene(2, 11).unwrap();
        let v = ViewSpec::new(45.0).unwrap();
        assert_eq!(
            generate_trajectory(&s, &v, 50).unwrap(),
            generate_trajectory(&s, &v, 50).unwrap()
        );
    }

    #[test]
    fn idle_controller_fails_with_full_horizon() {
        let s = scene_with_target([0.5, 0.5]);
        let idle = |_: &Observation<'_>| [0.0, 0.0];
        let out = simulate_rollout(&idle, &s, &ViewSpec::reference(), 50).unwrap();
        assert_eq!(
            out,
            RolloutOutcome {
                success: false,
                steps_taken: 50
            }
        );
    }

    #[test]
    fn nan_controller_faults() {
        let s = sample_scene(0, 2).unwrap();
        let bad = |_: &Observation<'_>| [f64::NAN, 0.0];
        let err = simulate_rollout(&bad, &s, &ViewSpec::reference(), 50).unwrap_err();
        assert!(err.to_string().contains("controller fault"));
    }

    proptest! {
        #[test]
        fn expert_always_succeeds(task in 0usize..3, seed in any::<u64>(), theta in -90.0f64..=90.0) {
            let s = sample_scene(task, seed).unwrap();
            let view = ViewSpec::new(theta).unwrap();
            let traj = generate_trajectory(&s, &view, 50).unwrap();
            prop_assert!(traj.success);
            // world diameter / max step bounds the episode length
            prop_assert!(traj.steps.len() <= (2.0 * 2f64.sqrt() * 0.8 / MAX_STEP).ceil() as usize);
            prop_assert!(traj.steps.iter().all(|st| st.action.iter().all(|a| a.abs() <= MAX_STEP)));
            let out = simulate_rollout(&ExpertController, &s, &view, 50).unwrap();
            prop_assert!(out.success);
            prop_assert_eq!(out.steps_taken, traj.steps.len());
            prop_assert_eq!(expert_path(&s, 50).len(), traj.steps.len());
        }
    }
}
