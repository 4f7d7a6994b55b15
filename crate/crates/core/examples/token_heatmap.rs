//! Per-token cosine similarity between the reference-view latent and a
//! rotated view, before and after a short stage-2 fit, printed as a grid.

use lpaf::encoder::EncoderSpec;
use lpaf::evalkit::{target_tokens, token_heatmap, HeatmapResult};
use lpaf::fusion::FusionModule;
use lpaf::trainer::{stage2_fusion_only, PreparedData, StageConfig};
use lpaf::worldgen::{build_datasets, sample_scene, DatasetProtocol};

fn show(h: &HeatmapResult, target: &[(usize, usize)]) {
    println!(
        "θ={} {} — mean {:.3}, target tokens {:.3}",
        h.theta_deg,
        if h.fused { "fused" } else { "raw" },
        h.mean(),
        h.mean_over(target)
    );
    for (r, row) in h.grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let mark = if target.contains(&(r, c)) { '*' } else { ' ' };
                format!("{v:>5.2}{mark}")
            })
            .collect();
        println!("  {}", cells.join(""));
    }
}

fn main() -> lpaf::Result<()> {
    let protocol = DatasetProtocol {
        j: 6,
        ..DatasetProtocol::default()
    };
    let (d_r, d_m) = build_datasets(&protocol)?;
    let data = PreparedData::new(EncoderSpec::default(), &d_r, &d_m, None)?;
    let cfg = StageConfig {
        stage2_epochs: 12,
        ..StageConfig::default()
    };
    let (fusion, _) = stage2_fusion_only(&cfg, FusionModule::new(cfg.seed), &data)?;

    let scene = sample_scene(1, 4242)?;
    let target = target_tokens(&scene);
    for theta in [0.0, 45.0] {
        show(
            &token_heatmap(None, &data.encoder, &scene, scene.gripper_start, theta)?,
            &target,
        );
        show(
            &token_heatmap(
                Some(&fusion),
                &data.encoder,
                &scene,
                scene.gripper_start,
                theta,
            )?,
            &target,
        );
    }
    Ok(())
}
