//! PTN1 checkpoints: named f32 tensors in registration order.

use std::path::Path;

use plenumlab_core::autodiff::{ParamStore, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PTN1";

pub fn encode(entries: &[(String, Tensor<f32>)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("tensor name {name:?} is too long")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for d in &t.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| Error::TruncatedFile(self.path.to_path_buf()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut cur = Cursor { bytes, at: 0, path };
    if cur.take(4)? != MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: "PTN1" });
    }
    let count = cur.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format(format!("{}: tensor name is not UTF-8", path.display())))?
            .to_string();
        let rank = cur.u32()?;
        let mut dims = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            dims.push(cur.u32()?);
        }
        let n = dims.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(|| Error::TruncatedFile(path.to_path_buf()))?;
        let payload = cur.take(n.checked_mul(4).ok_or_else(|| Error::TruncatedFile(path.to_path_buf()))?)?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let t = Tensor::new(&dims, data).map_err(|e| Error::Format(e.to_string()))?;
        out.push((name, t));
    }
    if cur.at != bytes.len() {
        return Err(Error::DimensionMismatch { path: path.to_path_buf(), what: format!("{} trailing bytes", bytes.len() - cur.at) });
    }
    Ok(out)
}

pub fn write(params: &ParamStore<f32>, path: &Path) -> Result<()> {
    let entries: Vec<(String, Tensor<f32>)> = params.iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
    std::fs::write(path, encode(&entries)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let entries = vec![
            ("a.w".to_string(), Tensor::new(&[2, 3], vec![1.0, -2.0, 3.5, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap()),
            ("b".to_string(), Tensor::new(&[1], vec![7.0]).unwrap()),
        ];
        let bytes = encode(&entries).unwrap();
        let back = decode(&bytes, Path::new("c")).unwrap();
        assert_eq!(back.len(), 2);
        for ((n0, t0), (n1, t1)) in entries.iter().zip(&back) {
            assert_eq!(n0, n1);
            assert_eq!(t0.dims, t1.dims);
            assert!(t0.data.iter().zip(&t1.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(matches!(decode(&bytes[..bytes.len() - 1], Path::new("c")), Err(Error::TruncatedFile(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, Path::new("c")), Err(Error::BadMagic { .. })));
    }
}
