//! Evaluation: viewpoint sweeps, latent alignment diagnostics, token
//! similarity heatmaps and file export.
//!
//! "Mean success" anywhere in this module is the uniform average of
//! per-viewpoint success rates.

mod diagnostics;
mod export;
mod sweep;

pub use diagnostics::{
    alignment_report, cosine_similarity, target_tokens, token_heatmap, AlignmentReport,
    AlignmentRow, HeatmapResult,
};
pub use export::{
    export, heatmap_file_name, heatmap_rgb, read_sweep_csv, sweep_csv, write_alignment_csv,
    write_heatmap, write_sweep_csv, Report, ALIGNMENT_HEADER, HEATMAP_CELL, SWEEP_HEADER,
};
pub use sweep::{sweep, sweep_controller, SweepResult, SweepSpec, ViewResult};
