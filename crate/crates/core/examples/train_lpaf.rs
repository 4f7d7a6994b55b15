//! Generates a small dataset, trains the three-stage fusion pipeline next to
//! both baselines, and compares them on a short viewpoint sweep.
//!
//!     cargo run --release --example train_lpaf -- [j] [epoch_scale]
//!
//! `j` is trajectories per (task, view) cell (default 8); `epoch_scale`
//! multiplies the default stage lengths (default 0.25).

use std::time::Instant;

use lpaf::encoder::EncoderSpec;
use lpaf::evalkit::{sweep, SweepSpec};
use lpaf::trainer::{
    train_baseline_mixed, train_baseline_reference, train_lpaf, PreparedData, StageConfig,
};
use lpaf::worldgen::{build_datasets, build_reference_set, DatasetProtocol};

fn main() -> lpaf::Result<()> {
    let mut args = std::env::args().skip(1);
    let j: usize = args.next().map_or(8, |s| s.parse().expect("j"));
    let scale: f64 = args
        .next()
        .map_or(0.25, |s| s.parse().expect("epoch scale"));

    let protocol = DatasetProtocol {
        j,
        ..DatasetProtocol::default()
    };
    let (d_r, d_m) = build_datasets(&protocol)?;
    let large = build_reference_set(&protocol, (protocol.v + 1) * j)?;
    let data = PreparedData::new(EncoderSpec::default(), &d_r, &d_m, Some(&large))?;
    println!(
        "D_R {} steps, D_M {} steps, {} pairs",
        data.reference.len(),
        data.multiview.len(),
        data.pairs.len()
    );

    let base = StageConfig::default();
    let epochs = |e: usize| ((e as f64 * scale).round() as usize).max(1);
    let cfg = StageConfig {
        stage1_epochs: epochs(base.stage1_epochs),
        stage2_epochs: epochs(base.stage2_epochs),
        stage3_epochs: epochs(base.stage3_epochs),
        ..base
    };
    let spec = SweepSpec::with_views(vec![-30.0, -10.0, 0.0, 10.0, 30.0, 45.0], 20, 0);

    type Trainer = fn(&StageConfig, &PreparedData) -> lpaf::Result<lpaf::trainer::TrainedBundle>;
    let arms: [(&str, Trainer); 3] = [
        ("reference only", train_baseline_reference),
        ("mixed", train_baseline_mixed),
        ("lpaf", train_lpaf),
    ];
    for (name, train) in arms {
        let t = Instant::now();
        let bundle = train(&cfg, &data)?;
        let last = bundle.curves.last().expect("at least one epoch");
        let r = sweep(&bundle, &spec)?;
        let rates: Vec<String> = r
            .views
            .iter()
            .map(|v| format!("{:.0}%", 100.0 * v.rate()))
            .collect();
        println!(
            "{name:<15} final loss {:.4}  sweep [{}]  mean {:.1}%  ({:.0?})",
            last.action_loss.or(last.align_loss).unwrap_or(f64::NAN),
            rates.join(" "),
            100.0 * r.mean_success(None)?,
            t.elapsed()
        );
    }
    Ok(())
}
