//! Renders one scene from a handful of camera angles and writes PPM files.
//!
//!     cargo run --example render_views -- [out_dir] [task] [scene_seed]

use std::path::PathBuf;

use lpaf::worldgen::{render, sample_scene, ViewSpec};

fn main() -> lpaf::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/render_views".into()));
    let task: usize = args.next().map_or(0, |s| s.parse().expect("task id"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("scene seed"));
    std::fs::create_dir_all(&out).expect("create output dir");

    let scene = sample_scene(task, seed)?;
    println!(
        "task {task}, target {:?} at {:?}",
        scene.target().color,
        scene.target().center
    );
    for theta in [-90.0, -45.0, 0.0, 30.0, 45.0, 90.0] {
        let img = render(&scene, scene.gripper_start, &ViewSpec::new(theta)?);
        let path = out.join(format!("view_{theta}.ppm"));
        img.write_ppm(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}
