//! Success rate against camera angle for the expert, a hand-built
//! pixel-reading controller, and a policy that ignores the image.
//!
//! The pixel controller locates the white gripper and the task-coloured disc
//! by their pixel centroids at the reference view and steers between them,
//! so its success collapses away from θ=0 exactly the way an unaligned
//! reference-only policy is expected to.

use lpaf::evalkit::{sweep_controller, SweepSpec};
use lpaf::worldgen::{
    clamp_step, ExpertController, Observation, PaletteColor, Vec2, IMAGE_SIZE, WORKSPACE_LIMIT,
};

fn centroid(obs: &Observation<'_>, pred: impl Fn([f32; 3]) -> bool) -> Option<Vec2> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            if pred(obs.image.pixel(x, y)) {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    // Pixel indices back to camera coordinates; the image y axis points down.
    let scale = 2.0 * WORKSPACE_LIMIT / (IMAGE_SIZE - 1) as f64;
    (n > 0.0).then(|| {
        [
            sx / n * scale - WORKSPACE_LIMIT,
            WORKSPACE_LIMIT - sy / n * scale,
        ]
    })
}

fn pixel_controller(obs: &Observation<'_>) -> Vec2 {
    let colour = PaletteColor::ALL[obs.task_id].rgb();
    let gripper = centroid(obs, |p| p.iter().all(|&c| c > 0.95));
    let target = centroid(obs, |p| p == colour);
    match (gripper, target) {
        (Some(g), Some(t)) => clamp_step([t[0] - g[0], t[1] - g[1]]),
        _ => [0.0, 0.0],
    }
}

fn main() -> lpaf::Result<()> {
    let spec = SweepSpec::with_views(
        vec![-90.0, -45.0, -20.0, -10.0, 0.0, 10.0, 20.0, 45.0, 90.0],
        30,
        0,
    );
    let blind = |_: &Observation<'_>| [0.0, 0.0];
    let expert = sweep_controller(&ExpertController, "expert", 0, &spec)?;
    let pixels = sweep_controller(&pixel_controller, "pixel centroid", 0, &spec)?;
    let zero = sweep_controller(&blind, "zero action", 0, &spec)?;

    print!("{:>16}", "θ");
    for v in &spec.viewpoints {
        print!("{v:>6}");
    }
    println!("   mean");
    for r in [&expert, &pixels, &zero] {
        print!("{:>16}", r.arm);
        for v in &r.views {
            print!("{:>5.0}%", 100.0 * v.rate());
        }
        println!("  {:>4.1}%", 100.0 * r.mean_success(None)?);
    }
    Ok(())
}
