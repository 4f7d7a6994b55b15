use serde::{Deserialize, Serialize};

use super::{
    rotate, Anchor, Disc, Scene, Vec2, ViewSpec, ANCHOR_GRAY, BACKGROUND, CHANNELS, GRIPPER_RADIUS,
    GRIPPER_WHITE, IMAGE_LEN, IMAGE_SIZE,
};

const LAST: f64 = (IMAGE_SIZE - 1) as f64;
/// Pixels per world unit.
const SCALE: f64 = LAST / 2.0;

/// 32×32 RGB image, row-major `[y][x][c]`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    data: Vec<f32>,
}

impl Image {
    pub fn filled(value: f32) -> Self {
        Image {
            data: vec![value; IMAGE_LEN],
        }
    }

    pub fn from_data(data: Vec<f32>) -> Option<Self> {
        let valid = data.len() == IMAGE_LEN
            && data
                .iter()
                .all(|v| v.is_finite() && (0.0..=1.0).contains(v));
        valid.then_some(Image { data })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * IMAGE_SIZE + x) * CHANNELS + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * IMAGE_SIZE + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn paint(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * IMAGE_SIZE + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }
}

/// Maps a world point to the nearest pixel `(x, y)` under `view`.
/// The result may lie outside the frame.
pub fn world_to_pixel(p: Vec2, view: &ViewSpec) -> (i64, i64) {
    let (cx, cy) = continuous_pixel(rotate(p, view.theta_deg));
    (cx.round() as i64, cy.round() as i64)
}

fn continuous_pixel(q: Vec2) -> (f64, f64) {
    ((q[0] + 1.0) / 2.0 * LAST, (1.0 - q[1]) / 2.0 * LAST)
}

/// Camera-frame coordinates of pixel `(x, y)`.
fn pixel_to_camera(x: usize, y: usize) -> Vec2 {
    [x as f64 / SCALE - 1.0, 1.0 - y as f64 / SCALE]
}

/// Pixel index range covering `[lo, hi]`, clipped to the frame.
fn span(lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
    let lo = lo.floor().max(0.0);
    let hi = hi.ceil().min(LAST);
    if lo > hi {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    lo as usize..=hi as usize
}

fn disc_cover(center: Vec2, radius: f64, view: &ViewSpec, mut visit: impl FnMut(usize, usize)) {
    let (cx, cy) = continuous_pixel(rotate(center, view.theta_deg));
    let r = radius * SCALE;
    let r2 = r * r;
    for y in span(cy - r, cy + r) {
        for x in span(cx - r, cx + r) {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r2 {
                visit(x, y);
            }
        }
    }
}

fn anchor_cover(anchor: &Anchor, view: &ViewSpec, mut visit: impl FnMut(usize, usize)) {
    let c = rotate(anchor.center, view.theta_deg);
    let phi = anchor.angle_deg + view.theta_deg;
    let half = anchor.side / 2.0;
    let (cx, cy) = continuous_pixel(c);
    let reach = anchor.half_diagonal() * SCALE;
    for y in span(cy - reach, cy + reach) {
        for x in span(cx - reach, cx + reach) {
            let q = pixel_to_camera(x, y);
            let local = rotate([q[0] - c[0], q[1] - c[1]], -phi);
            if local[0].abs() <= half && local[1].abs() <= half {
                visit(x, y);
            }
        }
    }
}

/// Pixels covered by `disc` under `view`, ignoring occlusion.
pub fn disc_pixels(disc: &Disc, view: &ViewSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    disc_cover(disc.center, disc.radius, view, |x, y| out.push((x, y)));
    out
}

/// Renders only the anchor over the background.
pub fn render_anchor_only(anchor: &Anchor, view: &ViewSpec) -> Image {
    let mut img = Image::filled(BACKGROUND);
    let gray = [ANCHOR_GRAY; 3];
    anchor_cover(anchor, view, |x, y| img.paint(x, y, gray));
    img
}

/// Orthographic render of the world state seen by a camera rotated by
/// `view.theta_deg` about the table center. Draw order: anchor, discs, gripper.
pub fn render(scene: &Scene, gripper: Vec2, view: &ViewSpec) -> Image {
    let mut img = render_anchor_only(&scene.anchor, view);
    for disc in &scene.objects {
        let rgb = disc.color.rgb();
        disc_cover(disc.center, disc.radius, view, |x, y| img.paint(x, y, rgb));
    }
    disc_cover(gripper, GRIPPER_RADIUS, view, |x, y| {
        img.paint(x, y, [GRIPPER_WHITE; 3])
    });
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{sample_scene, Anchor, PaletteColor};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn lone_disc(center: Vec2) -> Scene {
        Scene {
            objects: vec![Disc {
                center,
                radius: 0.1,
                color: PaletteColor::Red,
            }],
            anchor: Anchor::FIXED,
            gripper_start: [0.0, 0.0],
            task_id: 0,
            seed: 0,
        }
    }

    fn red_pixels(img: &Image) -> BTreeSet<(usize, usize)> {
        let mut set = BTreeSet::new();
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                if img.pixel(x, y) == [1.0, 0.0, 0.0] {
                    set.insert((x, y));
                }
            }
        }
        set
    }

    fn centroid(set: &BTreeSet<(usize, usize)>) -> (f64, f64) {
        let n = set.len() as f64;
        let sx: f64 = set.iter().map(|p| p.0 as f64).sum();
        let sy: f64 = set.iter().map(|p| p.1 as f64).sum();
        (sx / n, sy / n)
    }

    // keeps the gripper out of frame
    const OFFSCREEN: Vec2 = [5.0, 5.0];

    #[test]
    fn origin_disc_is_centered() {
        let img = render(&lone_disc([0.0, 0.0]), OFFSCREEN, &ViewSpec::reference());
        let (cx, cy) = centroid(&red_pixels(&img));
        assert!((cx - 16.0).abs() <= 1.0 && (cy - 16.0).abs() <= 1.0);
        assert_eq!(world_to_pixel([0.0, 0.0], &ViewSpec::reference()), (16, 16));
    }

    #[test]
    fn quarter_turn_moves_disc_to_rotated_position() {
        // R(90°)·(0.5, 0) = (0, 0.5)
        let rotated = render(
            &lone_disc([0.5, 0.0]),
            OFFSCREEN,
            &ViewSpec::new(90.0).unwrap(),
        );
        let upright = render(&lone_disc([0.0, 0.5]), OFFSCREEN, &ViewSpec::reference());
        assert_eq!(red_pixels(&rotated), red_pixels(&upright));
        // pixel map by hand: x = round(1/2·31) = 16, y = round(0.25·31) = 8
        assert_eq!(
            world_to_pixel([0.5, 0.0], &ViewSpec::new(90.0).unwrap()),
            (16, 8)
        );
    }

    #[test]
    fn empty_scene_is_background_plus_anchor() {
        let scene = Scene {
            objects: vec![],
            ..lone_disc([0.0, 0.0])
        };
        let img = render(&scene, OFFSCREEN, &ViewSpec::reference());
        let anchor = render_anchor_only(&Anchor::FIXED, &ViewSpec::reference());
        assert_eq!(img, anchor);
        let mut gray = 0;
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                match img.pixel(x, y) {
                    [BACKGROUND, BACKGROUND, BACKGROUND] => {}
                    [ANCHOR_GRAY, ANCHOR_GRAY, ANCHOR_GRAY] => gray += 1,
                    other => panic!("unexpected pixel {other:?}"),
                }
            }
        }
        assert!(gray > 0);
    }

    #[test]
    fn gripper_drawn_last() {
        let scene = lone_disc([0.0, 0.0]);
        let img = render(&scene, [0.0, 0.0], &ViewSpec::reference());
        assert_eq!(img.pixel(16, 16), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn anchor_visible_at_every_angle() {
        for t in -180..180 {
            let view = ViewSpec::new(t as f64).unwrap();
            let img = render_anchor_only(&Anchor::FIXED, &view);
            assert!(img.data().contains(&ANCHOR_GRAY), "anchor hidden at {t}°");
        }
    }

    #[test]
    fn anchor_identifies_viewpoint() {
        let sets: Vec<Vec<f32>> = (-180..180)
            .map(|t| {
                render_anchor_only(&Anchor::FIXED, &ViewSpec::new(t as f64).unwrap())
                    .data()
                    .to_vec()
            })
            .collect();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                let gap = (j - i).min(360 - (j - i));
                if gap >= 10 {
                    assert_ne!(
                        sets[i],
                        sets[j],
                        "angles {} and {}",
                        i as i64 - 180,
                        j as i64 - 180
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn view_consistency(task in 0usize..3, seed in any::<u64>(), theta in -180.0f64..180.0,
                            gx in -0.8f64..0.8, gy in -0.8f64..0.8) {
            let scene = sample_scene(task, seed).unwrap();
            let view = ViewSpec::new(theta).unwrap();
            let direct = render(&scene, [gx, gy], &view);
            let moved = render(&scene.rotate_world(theta), rotate([gx, gy], theta), &ViewSpec::reference());
            prop_assert_eq!(direct, moved);
        }

        #[test]
        fn pixels_are_valid(task in 0usize..3, seed in any::<u64>(), theta in -180.0f64..180.0) {
            let scene = sample_scene(task, seed).unwrap();
            let img = render(&scene, scene.gripper_start, &ViewSpec::new(theta).unwrap());
            prop_assert!(Image::from_data(img.data().to_vec()).is_some());
        }
    }
}
