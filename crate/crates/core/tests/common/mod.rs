#![allow(dead_code)]

use lpaf::encoder::EncoderSpec;
use lpaf::trainer::{PreparedData, StageConfig};
use lpaf::worldgen::{build_datasets, build_reference_set, DatasetProtocol};

pub fn tiny_protocol() -> DatasetProtocol {
    DatasetProtocol {
        j: 2,
        v: 2,
        horizon: 20,
        ..DatasetProtocol::default()
    }
}

pub fn tiny_data() -> PreparedData {
    let p = tiny_protocol();
    let (d_r, d_m) = build_datasets(&p).unwrap();
    let large = build_reference_set(&p, (p.v + 1) * p.j).unwrap();
    PreparedData::new(EncoderSpec::default(), &d_r, &d_m, Some(&large)).unwrap()
}

pub fn short_config() -> StageConfig {
    StageConfig {
        stage1_epochs: 2,
        stage2_epochs: 2,
        stage3_epochs: 2,
        ..StageConfig::default()
    }
}
