//! PFD1 dataset files: a fixed little-endian header, the geometry mask and
//! the `(t, layer, row, col)` values as f32.

use std::path::Path;

use plenumlab_core::geometry::MAP_SIZE;
use plenumlab_core::probes::{FlowDataset, LAYERS, SNAPSHOT_LEN};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFD1";
const HEADER_LEN: usize = 4 + 4 * 4 + MAP_SIZE * MAP_SIZE;

pub fn encode(ds: &FlowDataset) -> Result<Vec<u8>> {
    if ds.values.len() != ds.t_len * SNAPSHOT_LEN {
        return Err(Error::Format(format!("dataset holds {} values for {} snapshots", ds.values.len(), ds.t_len)));
    }
    let t_len = u32::try_from(ds.t_len).map_err(|_| Error::Format("more than u32::MAX snapshots".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * ds.values.len());
    out.extend_from_slice(MAGIC);
    for v in [t_len, LAYERS as u32, MAP_SIZE as u32, MAP_SIZE as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(ds.geom_mask.iter().flatten().map(|v| *v as u8));
    for v in &ds.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses the binary part; time metadata and labels come from the sidecar
/// and are left at `t0 = 0`, `dt_record = 1`.
pub fn decode(bytes: &[u8], path: &Path) -> Result<FlowDataset> {
    let truncated = || Error::TruncatedFile(path.to_path_buf());
    if bytes.len() < 4 {
        return Err(truncated());
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: "PFD1" });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated());
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (t_len, l, h, w) = (field(0), field(1), field(2), field(3));
    if (l, h, w) != (LAYERS, MAP_SIZE, MAP_SIZE) {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            what: format!("expected {LAYERS}x{MAP_SIZE}x{MAP_SIZE}, found {l}x{h}x{w}"),
        });
    }
    let mut geom = [[false; MAP_SIZE]; MAP_SIZE];
    for (i, b) in bytes[20..HEADER_LEN].iter().enumerate() {
        geom[i / MAP_SIZE][i % MAP_SIZE] = match b {
            0 => false,
            1 => true,
            _ => return Err(Error::Format(format!("{}: geometry mask byte {b} is not 0 or 1", path.display()))),
        };
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = t_len.checked_mul(SNAPSHOT_LEN * 4).ok_or_else(truncated)?;
    if payload.len() < expected {
        return Err(truncated());
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            what: format!("{} trailing bytes after {t_len} snapshots", payload.len() - expected),
        });
    }
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let ds = FlowDataset::from_values(values, geom, 0.0, 1.0)?;
    if !ds.is_consistent() {
        return Err(Error::Format(format!("{}: non-finite values or nonzero values outside the geometry", path.display())));
    }
    Ok(ds)
}

pub fn write(ds: &FlowDataset, path: &Path) -> Result<()> {
    std::fs::write(path, encode(ds)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<FlowDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
