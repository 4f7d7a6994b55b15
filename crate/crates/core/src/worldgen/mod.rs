//! Synthetic multiview reaching world.
//!
//! A 2D table holds three colored discs, a fixed gray anchor square and a
//! white gripper. A global orthographic camera rotates about the table center;
//! its angle is the only perspective variable. Actions are world-frame
//! displacements, so a policy that only ever saw the reference view will
//! steer in the wrong direction when the camera is rotated.

mod dataset;
mod io;
mod render;
mod rollout;
mod scene;

pub use dataset::{
    build_datasets, build_reference_set, heldout_pairs, Dataset, DatasetProtocol, PairedState,
};
pub use io::{
    dataset_bytes, read_dataset, write_dataset, write_ppm, DATASET_MAGIC, DATASET_VERSION,
};
pub use render::{disc_pixels, render, render_anchor_only, world_to_pixel, Image};
pub use rollout::{
    expert_action, expert_path, generate_trajectory, simulate_rollout, Controller,
    ExpertController, Observation, RolloutOutcome, Step, Trajectory,
};
pub use scene::{rotate, sample_scene, Anchor, Disc, PaletteColor, Scene, ViewSpec};

/// World-frame 2-vector.
pub type Vec2 = [f64; 2];

pub const IMAGE_SIZE: usize = 32;
pub const CHANNELS: usize = 3;
pub const IMAGE_LEN: usize = IMAGE_SIZE * IMAGE_SIZE * CHANNELS;

pub const TASK_COUNT: usize = 3;
/// Disc centers and gripper starts are drawn from `[-WORLD_BOUND, WORLD_BOUND]²`.
pub const WORLD_BOUND: f64 = 0.8;
pub const DISC_RADIUS_RANGE: (f64, f64) = (0.06, 0.12);
pub const DISC_GAP: f64 = 0.05;
pub const ANCHOR_CENTER: Vec2 = [0.6, 0.6];
pub const ANCHOR_SIDE: f64 = 0.12;
pub const GRIPPER_RADIUS: f64 = 0.05;
/// Gripper positions are clamped to `[-WORKSPACE_LIMIT, WORKSPACE_LIMIT]²`.
pub const WORKSPACE_LIMIT: f64 = 1.0;
pub const MAX_STEP: f64 = 0.1;
pub const SUCCESS_RADIUS: f64 = 0.05;
pub const DEFAULT_HORIZON: usize = 50;

pub const BACKGROUND: f32 = 0.1;
pub const ANCHOR_GRAY: f32 = 0.5;
pub const GRIPPER_WHITE: f32 = 1.0;

pub fn clamp_step(a: Vec2) -> Vec2 {
    [
        a[0].clamp(-MAX_STEP, MAX_STEP),
        a[1].clamp(-MAX_STEP, MAX_STEP),
    ]
}

pub(crate) fn distance(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
