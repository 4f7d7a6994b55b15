use std::fs;
use std::path::{Path, PathBuf};

use super::{AlignmentReport, HeatmapResult, SweepResult, ViewResult};
use crate::encoder::GRID;
use crate::error::{Error, Result};
use crate::worldgen::write_ppm;

pub const SWEEP_HEADER: [&str; 7] = [
    "arm",
    "seed",
    "theta_deg",
    "episodes",
    "successes",
    "rate",
    "mean_steps",
];
pub const ALIGNMENT_HEADER: [&str; 6] = [
    "theta_deg",
    "pairs",
    "raw_mse",
    "fused_mse",
    "raw_cos",
    "fused_cos",
];
/// Pixels per token slot in exported heatmaps.
pub const HEATMAP_CELL: usize = 8;

/// Everything one evaluation run writes.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub sweeps: Vec<SweepResult>,
    pub alignment: Option<AlignmentReport>,
    pub heatmaps: Vec<HeatmapResult>,
    /// Extra text appended to `summary.txt`, e.g. ablation tables.
    pub tables: Option<String>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

/// The sweep CSV as bytes; floats use shortest round-trip formatting.
pub fn sweep_csv(results: &[SweepResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in results {
        for v in &r.views {
            w.write_record([
                r.arm.clone(),
                r.seed.to_string(),
                v.theta_deg.to_string(),
                v.episodes.to_string(),
                v.successes.to_string(),
                v.rate().to_string(),
                v.mean_steps.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_sweep_csv(path: &Path, results: &[SweepResult]) -> Result<()> {
    fs::write(path, sweep_csv(results)).map_err(|e| Error::io(path, e))
}

/// Parses a sweep CSV back into results, grouping consecutive rows by
/// `(arm, seed)`. The `rate` column is checked against the counts.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepResult>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out: Vec<SweepResult> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |i: usize| bad(format!("bad {} value {:?}", SWEEP_HEADER[i], field(i)));
        let seed: u64 = field(1).parse().map_err(|_| parse_err(1))?;
        let view = ViewResult {
            theta_deg: field(2).parse().map_err(|_| parse_err(2))?,
            episodes: field(3).parse().map_err(|_| parse_err(3))?,
            successes: field(4).parse().map_err(|_| parse_err(4))?,
            mean_steps: field(6).parse().map_err(|_| parse_err(6))?,
        };
        let rate: f64 = field(5).parse().map_err(|_| parse_err(5))?;
        if view.successes > view.episodes || rate != view.rate() {
            return Err(bad(format!("inconsistent counts in row {:?}", rec)));
        }
        match out.last_mut() {
            Some(last) if last.arm == field(0) && last.seed == seed => last.views.push(view),
            _ => out.push(SweepResult {
                arm: field(0).to_string(),
                seed,
                views: vec![view],
            }),
        }
    }
    Ok(out)
}

pub fn write_alignment_csv(path: &Path, report: &AlignmentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(ALIGNMENT_HEADER).map_err(csv_err(path))?;
    for r in &report.rows {
        w.write_record([
            r.theta_deg.to_string(),
            r.pairs.to_string(),
            r.raw_mse.to_string(),
            r.fused_mse.to_string(),
            r.raw_cos.to_string(),
            r.fused_cos.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Linear blue (−1) → red (+1) map, each slot drawn as a square cell.
pub fn heatmap_rgb(grid: &[[f64; GRID]; GRID]) -> Vec<f32> {
    let side = GRID * HEATMAP_CELL;
    let mut rgb = vec![0.0f32; side * side * 3];
    for y in 0..side {
        for x in 0..side {
            let t =
                ((grid[y / HEATMAP_CELL][x / HEATMAP_CELL].clamp(-1.0, 1.0) + 1.0) / 2.0) as f32;
            let i = (y * side + x) * 3;
            rgb[i..i + 3].copy_from_slice(&[t, 0.0, 1.0 - t]);
        }
    }
    rgb
}

/// `heatmap_<θ>_raw.ppm` or `heatmap_<θ>_fused.ppm`.
pub fn heatmap_file_name(h: &HeatmapResult) -> String {
    format!(
        "heatmap_{}_{}.ppm",
        h.theta_deg,
        if h.fused { "fused" } else { "raw" }
    )
}

pub fn write_heatmap(path: &Path, h: &HeatmapResult) -> Result<()> {
    let side = GRID * HEATMAP_CELL;
    write_ppm(path, side, side, &heatmap_rgb(&h.grid))
}

fn summary(report: &Report) -> String {
    let mut s = String::from("mean success per arm (uniform over viewpoints)\n");
    s.push_str(&format!("{:<12} {:>6} {:>10}\n", "arm", "seed", "mean"));
    for r in &report.sweeps {
        let mean = r
            .mean_success(None)
            .map(|m| format!("{:.2}%", 100.0 * m))
            .unwrap_or_else(|_| "-".into());
        s.push_str(&format!("{:<12} {:>6} {:>10}\n", r.arm, r.seed, mean));
    }
    if let Some(t) = &report.tables {
        s.push('\n');
        s.push_str(t);
    }
    s
}

/// Writes `sweep.csv`, `summary.txt` and, when present, `alignment.csv` and
/// heatmap PPMs into `dir`. Returns the written paths.
pub fn export(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join("sweep.csv");
    write_sweep_csv(&path, &report.sweeps)?;
    written.push(path);
    if let Some(a) = &report.alignment {
        let path = dir.join("alignment.csv");
        write_alignment_csv(&path, a)?;
        written.push(path);
    }
    for h in &report.heatmaps {
        let path = dir.join(heatmap_file_name(h));
        write_heatmap(&path, h)?;
        written.push(path);
    }
    let path = dir.join("summary.txt");
    fs::write(&path, summary(report)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
