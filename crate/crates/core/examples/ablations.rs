//! The six-arm ablation (loss type, curriculum, stage-3 freezing) at a
//! reduced scale, rendered as the three comparison tables.

use lpaf::encoder::EncoderSpec;
use lpaf::evalkit::SweepSpec;
use lpaf::trainer::{run_ablations, PreparedData, StageConfig};
use lpaf::worldgen::{build_datasets, DatasetProtocol};

fn main() -> lpaf::Result<()> {
    let protocol = DatasetProtocol {
        j: 4,
        ..DatasetProtocol::default()
    };
    let (d_r, d_m) = build_datasets(&protocol)?;
    let data = PreparedData::new(EncoderSpec::default(), &d_r, &d_m, None)?;
    let base = StageConfig {
        stage1_epochs: 8,
        stage2_epochs: 8,
        stage3_epochs: 4,
        ..StageConfig::default()
    };
    let spec = SweepSpec::with_views(vec![-30.0, -10.0, 10.0, 30.0], 10, 0);
    let report = run_ablations(&base, &data, &[0], &spec)?;
    print!("{}", report.render());
    Ok(())
}
