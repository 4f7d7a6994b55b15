use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    distance, Vec2, ANCHOR_CENTER, ANCHOR_SIDE, DISC_GAP, DISC_RADIUS_RANGE, MAX_STEP, TASK_COUNT,
    WORLD_BOUND,
};
use crate::error::{Error, Result};
use crate::seed;

const MAX_ATTEMPTS: usize = 1000;
/// The gripper never starts on top of its target.
const MIN_START_DISTANCE: f64 = MAX_STEP;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PaletteColor {
    Red,
    Green,
    Blue,
}

impl PaletteColor {
    pub const ALL: [PaletteColor; 3] = [PaletteColor::Red, PaletteColor::Green, PaletteColor::Blue];

    pub fn rgb(self) -> [f32; 3] {
        match self {
            PaletteColor::Red => [1.0, 0.0, 0.0],
            PaletteColor::Green => [0.0, 1.0, 0.0],
            PaletteColor::Blue => [0.0, 0.0, 1.0],
        }
    }

    /// Task id of the "reach this color" task.
    pub fn task_id(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
    pub color: PaletteColor,
}

/// Gray square landmark. It is the same in every sampled scene; the angle only
/// changes when a scene is explicitly rotated with [`Scene::rotate_world`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub center: Vec2,
    pub side: f64,
    pub angle_deg: f64,
}

impl Anchor {
    pub const FIXED: Anchor = Anchor {
        center: ANCHOR_CENTER,
        side: ANCHOR_SIDE,
        angle_deg: 0.0,
    };

    pub fn half_diagonal(&self) -> f64 {
        self.side * std::f64::consts::FRAC_1_SQRT_2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<Disc>,
    pub anchor: Anchor,
    pub gripper_start: Vec2,
    pub task_id: usize,
    pub seed: u64,
}

impl Scene {
    /// The disc the task asks the gripper to reach.
    pub fn target(&self) -> &Disc {
        self.objects
            .iter()
            .find(|d| d.color.task_id() == self.task_id)
            .expect("scene always holds the task's disc")
    }

    /// Rotates every entity about the origin by `theta_deg`.
    pub fn rotate_world(&self, theta_deg: f64) -> Scene {
        let objects = self
            .objects
            .iter()
            .map(|d| Disc {
                center: rotate(d.center, theta_deg),
                ..*d
            })
            .collect();
        Scene {
            objects,
            anchor: Anchor {
                center: rotate(self.anchor.center, theta_deg),
                side: self.anchor.side,
                angle_deg: self.anchor.angle_deg + theta_deg,
            },
            gripper_start: rotate(self.gripper_start, theta_deg),
            task_id: self.task_id,
            seed: self.seed,
        }
    }
}

/// Counter-clockwise rotation about the origin.
pub fn rotate(p: Vec2, theta_deg: f64) -> Vec2 {
    let (s, c) = theta_deg.to_radians().sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub theta_deg: f64,
}

impl ViewSpec {
    pub fn new(theta_deg: f64) -> Result<Self> {
        if !(-180.0..180.0).contains(&theta_deg) {
            return Err(Error::InvalidConfig(format!(
                "view angle {theta_deg} outside [-180, 180)"
            )));
        }
        Ok(ViewSpec { theta_deg })
    }

    pub fn reference() -> Self {
        ViewSpec { theta_deg: 0.0 }
    }

    pub fn is_reference(&self) -> bool {
        self.theta_deg == 0.0
    }
}

/// Samples a scene by rejection: three non-overlapping discs (one per palette
/// color) clear of the anchor, and a gripper start away from the target.
pub fn sample_scene(task_id: usize, seed: u64) -> Result<Scene> {
    if task_id >= TASK_COUNT {
        return Err(Error::TaskOutOfRange(task_id));
    }
    let mut rng = seed::rng(&[seed, task_id as u64]);
    let anchor = Anchor::FIXED;
    let uniform_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec2 {
        [
            rng.gen_range(-WORLD_BOUND..=WORLD_BOUND),
            rng.gen_range(-WORLD_BOUND..=WORLD_BOUND),
        ]
    };

    for _ in 0..MAX_ATTEMPTS {
        let objects: Vec<Disc> = PaletteColor::ALL
            .iter()
            .map(|&color| Disc {
                center: uniform_point(&mut rng),
                radius: rng.gen_range(DISC_RADIUS_RANGE.0..=DISC_RADIUS_RANGE.1),
                color,
            })
            .collect();
        let gripper_start = uniform_point(&mut rng);

        let separated = objects.iter().enumerate().all(|(i, a)| {
            objects[i + 1..]
                .iter()
                .all(|b| distance(a.center, b.center) >= a.radius + b.radius + DISC_GAP)
        });
        let clear_of_anchor = objects.iter().all(|d| {
            distance(d.center, anchor.center) >= d.radius + anchor.half_diagonal() + DISC_GAP
        });
        let target = objects[task_id].center;
        if separated && clear_of_anchor && distance(gripper_start, target) >= MIN_START_DISTANCE {
            return Ok(Scene {
                objects,
                anchor,
                gripper_start,
                task_id,
                seed,
            });
        }
    }
    Err(Error::SceneInfeasible(MAX_ATTEMPTS))
}
