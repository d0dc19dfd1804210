//! File formats: binary tensor dumps, JSON sidecars, portable graymaps,
//! blind-run checkpoints and trace CSVs.
//!
//! A tensor dump is a 16-byte header (`b"PTYTENSR"`, format version and a
//! reserved word, both `u32` little-endian), the dimensions `L, n, n` and a
//! complex flag as `u32` little-endian, then the row-major entries as `f64`
//! little-endian, real and imaginary parts interleaved when complex.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, C64};
use crate::error::{Error, Result};
use crate::forward::MeasurementStack;
use crate::recon::{BlindState, ReconConfig};

const MAGIC: &[u8; 8] = b"PTYTENSR";
const VERSION: u32 = 1;

/// Raw contents of a tensor dump.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: [u32; 3],
    pub complex: bool,
    pub data: Vec<f64>,
}

pub fn write_tensor_raw(path: &Path, t: &Tensor) -> Result<()> {
    let per = if t.complex { 2 } else { 1 };
    let expect = t.dims.iter().map(|&d| d as usize).product::<usize>() * per;
    if t.data.len() != expect {
        return Err(Error::Shape(format!(
            "tensor data has {} values, dims need {expect}",
            t.data.len()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for d in t.dims {
        out.write_all(&d.to_le_bytes())?;
    }
    out.write_all(&u32::from(t.complex).to_le_bytes())?;
    for v in &t.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensor_raw(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{}: not a tensor dump",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let _reserved = read_u32(&mut r)?;
    let dims = [read_u32(&mut r)?, read_u32(&mut r)?, read_u32(&mut r)?];
    let complex = match read_u32(&mut r)? {
        0 => false,
        1 => true,
        f => {
            return Err(Error::Format(format!(
                "{}: bad complex flag {f}",
                path.display()
            )))
        }
    };
    let count = dims.iter().map(|&d| d as usize).product::<usize>() * if complex { 2 } else { 1 };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Tensor {
        dims,
        complex,
        data,
    })
}

pub fn write_stack(path: &Path, v: &BlockVector) -> Result<()> {
    let data = v.as_slice().iter().flat_map(|c| [c.re, c.im]).collect();
    let dims = [v.blocks() as u32, v.side() as u32, v.side() as u32];
    write_tensor_raw(
        path,
        &Tensor {
            dims,
            complex: true,
            data,
        },
    )
}

pub fn read_stack(path: &Path) -> Result<BlockVector> {
    let t = read_tensor_raw(path)?;
    if !t.complex || t.dims[1] != t.dims[2] {
        return Err(Error::Format(format!(
            "{}: not a complex stack of square grids",
            path.display()
        )));
    }
    let data = t
        .data
        .chunks_exact(2)
        .map(|p| C64::new(p[0], p[1]))
        .collect();
    BlockVector::from_vec(t.dims[0] as usize, t.dims[1] as usize, data)
}

pub fn write_measurements(path: &Path, y: &MeasurementStack) -> Result<()> {
    let dims = [y.shift_count() as u32, y.side() as u32, y.side() as u32];
    write_tensor_raw(
        path,
        &Tensor {
            dims,
            complex: false,
            data: y.as_slice().to_vec(),
        },
    )
}

pub fn read_measurements(path: &Path) -> Result<MeasurementStack> {
    let t = read_tensor_raw(path)?;
    if t.complex || t.dims[1] != t.dims[2] {
        return Err(Error::Format(format!(
            "{}: not a real measurement stack",
            path.display()
        )));
    }
    MeasurementStack::new(t.dims[0] as usize, t.dims[1] as usize, t.data)
}

/// Pretty-printed JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageChannel {
    Real,
    Imag,
    Magnitude,
}

impl ImageChannel {
    pub const ALL: [ImageChannel; 3] = [
        ImageChannel::Real,
        ImageChannel::Imag,
        ImageChannel::Magnitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImageChannel::Real => "real",
            ImageChannel::Imag => "imag",
            ImageChannel::Magnitude => "abs",
        }
    }

    fn pick(self, c: C64) -> f64 {
        match self {
            ImageChannel::Real => c.re,
            ImageChannel::Imag => c.im,
            ImageChannel::Magnitude => c.norm(),
        }
    }
}

/// Binary 8-bit PGM of a row-major grid, min-max scaled to `0..=255`.
pub fn write_pgm(path: &Path, values: &[f64], side: usize) -> Result<()> {
    if values.len() != side * side {
        return Err(Error::Shape(format!(
            "{} values for a {side}x{side} image",
            values.len()
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// One PGM per block and channel, named `{prefix}_{l}_{channel}.pgm`.
pub fn export_stack_images(dir: &Path, prefix: &str, v: &BlockVector) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for l in 0..v.blocks() {
        for ch in ImageChannel::ALL {
            let vals: Vec<f64> = v.block(l).iter().map(|&c| ch.pick(c)).collect();
            let path = dir.join(format!("{prefix}_{l}_{}.pgm", ch.name()));
            write_pgm(&path, &vals, v.side())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    completed: usize,
    j0: f64,
    records: Vec<crate::recon::BlindRecord>,
    config: ReconConfig,
}

/// Writes `z.bin`, `w.bin` and `checkpoint.json` into `dir`.
pub fn save_checkpoint(dir: &Path, state: &BlindState, cfg: &ReconConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_stack(&dir.join("z.bin"), &state.z)?;
    write_stack(&dir.join("w.bin"), &state.w)?;
    let meta = CheckpointMeta {
        completed: state.completed,
        j0: state.j0,
        records: state.records.clone(),
        config: cfg.clone(),
    };
    write_json(&dir.join("checkpoint.json"), &meta)
}

pub fn load_checkpoint(dir: &Path) -> Result<(BlindState, ReconConfig)> {
    let meta: CheckpointMeta = read_json(&dir.join("checkpoint.json"))?;
    let state = BlindState {
        z: read_stack(&dir.join("z.bin"))?,
        w: read_stack(&dir.join("w.bin"))?,
        completed: meta.completed,
        j0: meta.j0,
        records: meta.records,
    };
    Ok((state, meta.config))
}

/// One line of a reconstruction trace. Values that do not apply are `NaN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub sub: usize,
    /// `z`, `w`, or `zw` for a joint PIM sweep.
    pub var: String,
    pub objective: f64,
    pub l_eps: f64,
    pub grad_norm_sq: f64,
    pub step: f64,
    pub rel_err_raw: f64,
    pub rel_err_aligned: f64,
    pub wall_ms: f64,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
