//! Binary dataset split files and PPM dumps.
//!
//! Split layout (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes   "LPAF"
//! version      u16       1
//! reserved     u16       0
//! trajectories u32
//! steps        u32       total over all trajectories
//! pairs        u32
//! height       u16       32
//! width        u16       32
//! channels     u16       3
//! reserved     u16       0
//! trajectory table, per trajectory:
//!     task_id u32, step_count u32, success u32, theta_deg f32, scene_seed u64
//! steps, in trajectory order, per step:
//!     gripper f32[2], action f32[2], image f32[h·w·c]
//! pairs, per pair:
//!     task_id u32, reserved u32, scene_seed u64, theta_deg f32,
//!     gripper f32[2], reference f32[h·w·c], auxiliary f32[h·w·c]
//! ```
//!
//! Scenes are rebuilt on load from `(task_id, scene_seed)`. Gripper states and
//! actions are stored as f32, so a loaded split carries f32-rounded values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{
    sample_scene, Dataset, Image, PairedState, Step, Trajectory, ViewSpec, CHANNELS, IMAGE_LEN,
    IMAGE_SIZE,
};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"LPAF";
pub const DATASET_VERSION: u16 = 1;

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(b)
    }
    fn u16(&mut self, v: u16) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::other("count exceeds u32"))?;
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f32(&mut self, v: f32) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn vec2(&mut self, v: [f64; 2]) -> std::io::Result<()> {
        self.f32(v[0] as f32)?;
        self.f32(v[1] as f32)
    }
    fn image(&mut self, img: &Image) -> std::io::Result<()> {
        for &v in img.data() {
            self.f32(v)?;
        }
        Ok(())
    }
}

fn encode_dataset<W: Write>(w: &mut Writer<W>, ds: &Dataset) -> std::io::Result<()> {
    w.bytes(DATASET_MAGIC)?;
    w.u16(DATASET_VERSION)?;
    w.u16(0)?;
    w.u32(ds.trajectories.len())?;
    w.u32(ds.step_count())?;
    w.u32(ds.paired_states.len())?;
    w.u16(IMAGE_SIZE as u16)?;
    w.u16(IMAGE_SIZE as u16)?;
    w.u16(CHANNELS as u16)?;
    w.u16(0)?;
    for t in &ds.trajectories {
        w.u32(t.task_id)?;
        w.u32(t.steps.len())?;
        w.u32(t.success as usize)?;
        w.f32(t.view.theta_deg as f32)?;
        w.u64(t.scene_seed)?;
    }
    for st in ds.trajectories.iter().flat_map(|t| &t.steps) {
        w.vec2(st.gripper)?;
        w.vec2(st.action)?;
        w.image(&st.image)?;
    }
    for p in &ds.paired_states {
        w.u32(p.scene.task_id)?;
        w.u32(0)?;
        w.u64(p.scene.seed)?;
        w.f32(p.theta_deg as f32)?;
        w.vec2(p.gripper)?;
        w.image(&p.reference)?;
        w.image(&p.auxiliary)?;
    }
    Ok(())
}

/// Serializes a split to bytes.
pub fn dataset_bytes(ds: &Dataset) -> Vec<u8> {
    let mut w = Writer { inner: Vec::new() };
    encode_dataset(&mut w, ds).expect("writing to a Vec cannot fail");
    w.inner
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = Writer {
        inner: BufWriter::new(file),
    };
    encode_dataset(&mut w, ds)
        .and_then(|_| w.inner.flush())
        .map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }
    fn u16(&mut self) -> Option<u16> {
        Some(u16::from_le_bytes(self.take(2)?.try_into().ok()?))
    }
    fn u32(&mut self) -> Option<usize> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?) as usize)
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f32(&mut self) -> Option<f32> {
        Some(f32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn vec2(&mut self) -> Option<[f64; 2]> {
        Some([self.f32()? as f64, self.f32()? as f64])
    }
    fn image(&mut self) -> Option<Option<Image>> {
        let raw = self.take(IMAGE_LEN * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Some(Image::from_data(data))
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fail = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let truncated = || fail("truncated file");
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };

    if r.take(4) != Some(DATASET_MAGIC.as_slice()) {
        return Err(fail("bad magic"));
    }
    let version = r.u16().ok_or_else(truncated)?;
    if version != DATASET_VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    r.u16().ok_or_else(truncated)?;
    let n_traj = r.u32().ok_or_else(truncated)?;
    let n_steps = r.u32().ok_or_else(truncated)?;
    let n_pairs = r.u32().ok_or_else(truncated)?;
    let dims = [r.u16(), r.u16(), r.u16()];
    if dims
        != [
            Some(IMAGE_SIZE as u16),
            Some(IMAGE_SIZE as u16),
            Some(CHANNELS as u16),
        ]
    {
        return Err(fail("unexpected image dimensions"));
    }
    r.u16().ok_or_else(truncated)?;

    let mut headers = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let task = r.u32().ok_or_else(truncated)?;
        let len = r.u32().ok_or_else(truncated)?;
        let success = r.u32().ok_or_else(truncated)? != 0;
        let theta = r.f32().ok_or_else(truncated)? as f64;
        let seed = r.u64().ok_or_else(truncated)?;
        headers.push((task, len, success, theta, seed));
    }
    if headers.iter().map(|h| h.1).sum::<usize>() != n_steps {
        return Err(fail("step count mismatch"));
    }
    let mut trajectories = Vec::with_capacity(n_traj);
    for (task_id, len, success, theta, scene_seed) in headers {
        let mut steps = Vec::with_capacity(len);
        for _ in 0..len {
            let gripper = r.vec2().ok_or_else(truncated)?;
            let action = r.vec2().ok_or_else(truncated)?;
            let image = r
                .image()
                .ok_or_else(truncated)?
                .ok_or_else(|| fail("invalid pixel"))?;
            steps.push(Step {
                image,
                gripper,
                action,
            });
        }
        trajectories.push(Trajectory {
            task_id,
            view: ViewSpec::new(theta).map_err(|_| fail("bad view angle"))?,
            scene_seed,
            steps,
            success,
        });
    }
    let mut paired_states = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let task = r.u32().ok_or_else(truncated)?;
        r.u32().ok_or_else(truncated)?;
        let seed = r.u64().ok_or_else(truncated)?;
        let theta_deg = r.f32().ok_or_else(truncated)? as f64;
        let gripper = r.vec2().ok_or_else(truncated)?;
        let reference = r
            .image()
            .ok_or_else(truncated)?
            .ok_or_else(|| fail("invalid pixel"))?;
        let auxiliary = r
            .image()
            .ok_or_else(truncated)?
            .ok_or_else(|| fail("invalid pixel"))?;
        let scene = sample_scene(task, seed).map_err(|e| fail(&e.to_string()))?;
        paired_states.push(PairedState {
            scene,
            gripper,
            reference,
            auxiliary,
            theta_deg,
        });
    }
    if r.pos != bytes.len() {
        return Err(fail("trailing bytes"));
    }
    Ok(Dataset {
        trajectories,
        paired_states,
    })
}

/// Binary PPM (P6) with 8-bit channels.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[f32]) -> Result<()> {
    assert_eq!(rgb.len(), width * height * 3, "ppm buffer size");
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(
        rgb.iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl Image {
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        write_ppm(path, IMAGE_SIZE, IMAGE_SIZE, self.data())
    }
}
