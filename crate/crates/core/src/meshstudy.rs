//! Assembly-wise percent-difference maps between two runs of different
//! resolution.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{DomainConfig, MAP_SIZE};
use crate::probes::{FlowDataset, LAYERS};

/// Cell-size ratios of the fine, medium and coarse members relative to fine.
pub const TRIPLET_RATIOS: [f64; 3] = [1.0, 1.1667, 1.4];
/// References below this magnitude (kg/s) make the percent error undefined.
pub const REFERENCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeshStudyError {
    #[error("the two datasets share no snapshot times")]
    NoOverlap,
    #[error("the two datasets have different geometry masks")]
    MaskMismatch,
    #[error("no snapshot pairs to compare")]
    Empty,
}

/// Fine, medium and coarse domain configurations with the fine one as given.
pub fn mesh_triplet(fine: &DomainConfig) -> [DomainConfig; 3] {
    [fine.clone(), fine.coarsened(TRIPLET_RATIOS[1]), fine.coarsened(TRIPLET_RATIOS[2])]
}

/// Pairs each snapshot of `a` with the nearest-in-time snapshot of `b`,
/// keeping pairs closer than half the coarser recording interval.
pub fn align_series(a: &FlowDataset, b: &FlowDataset) -> Result<Vec<(usize, usize)>, MeshStudyError> {
    if a.geom_mask != b.geom_mask {
        return Err(MeshStudyError::MaskMismatch);
    }
    let tol = 0.5 * a.dt_record.max(b.dt_record);
    let mut pairs = Vec::new();
    if b.t_len == 0 || !(b.dt_record > 0.0) {
        return Err(MeshStudyError::NoOverlap);
    }
    for i in 0..a.t_len {
        let t = a.time(i);
        let j = libm::round((t - b.t0) / b.dt_record);
        if j < 0.0 || j >= b.t_len as f64 {
            continue;
        }
        let j = j as usize;
        if (b.time(j) - t).abs() < tol * (1.0 - 1e-9) {
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(MeshStudyError::NoOverlap);
    }
    Ok(pairs)
}

/// Which of the two datasets supplies the percent-error denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    A,
    B,
}

/// Which map the layer averages summarize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    Max,
    Timeavg,
}

/// Percent-error maps indexed `[layer][row][col]`. Cells outside the
/// geometry, and cells whose reference came within [`REFERENCE_FLOOR`] of
/// zero, hold `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMaps {
    pub max_pct: Vec<f64>,
    pub timeavg_pct: Vec<f64>,
    pub abs_layer_avg: [f64; LAYERS],
    pub mode: ErrorMode,
    /// `(layer, row, col)` of cells excluded for a near-zero reference.
    pub near_zero: Vec<(usize, usize, usize)>,
    pub reference_label: String,
    pub compare_label: String,
}

impl ErrorMaps {
    #[inline]
    pub fn at(map: &[f64], layer: usize, row: usize, col: usize) -> f64 {
        map[(layer * MAP_SIZE + row) * MAP_SIZE + col]
    }

    /// Signed layer mean of the summarized map, the quantity the absolute
    /// average is meant to complement.
    pub fn signed_layer_avg(&self) -> [f64; LAYERS] {
        layer_means(self.summarized(), |v| v)
    }

    pub fn summarized(&self) -> &[f64] {
        match self.mode {
            ErrorMode::Max => &self.max_pct,
            ErrorMode::Timeavg => &self.timeavg_pct,
        }
    }
}

fn layer_means(map: &[f64], f: impl Fn(f64) -> f64) -> [f64; LAYERS] {
    let mut out = [0.0; LAYERS];
    for (l, plane) in map.chunks(MAP_SIZE * MAP_SIZE).enumerate() {
        let (sum, n) = plane.iter().filter(|v| !v.is_nan()).fold((0.0, 0usize), |(s, n), v| (s + f(*v), n + 1));
        out[l] = if n > 0 { sum / n as f64 } else { f64::NAN };
    }
    out
}

/// Percent errors `100 (compare - reference) / reference` over the paired
/// snapshots. The max map keeps the signed error of largest magnitude.
pub fn error_maps(
    a: &FlowDataset,
    b: &FlowDataset,
    pairs: &[(usize, usize)],
    reference: Reference,
    mode: ErrorMode,
) -> Result<ErrorMaps, MeshStudyError> {
    if pairs.is_empty() {
        return Err(MeshStudyError::Empty);
    }
    if a.geom_mask != b.geom_mask {
        return Err(MeshStudyError::MaskMismatch);
    }
    let n = LAYERS * MAP_SIZE * MAP_SIZE;
    let mut max_pct = vec![f64::NAN; n];
    let mut timeavg_pct = vec![f64::NAN; n];
    let mut near_zero = Vec::new();
    for l in 0..LAYERS {
        for r in 0..MAP_SIZE {
            for c in 0..MAP_SIZE {
                if !a.geom_mask[r][c] {
                    continue;
                }
                let mut worst = 0.0f64;
                let mut sum = 0.0;
                let mut excluded = false;
                for &(i, j) in pairs {
                    let (va, vb) = (a.get(i, l, r, c) as f64, b.get(j, l, r, c) as f64);
                    let (refv, cmp) = match reference {
                        Reference::A => (va, vb),
                        Reference::B => (vb, va),
                    };
                    if refv.abs() < REFERENCE_FLOOR {
                        excluded = true;
                        break;
                    }
                    let e = 100.0 * (cmp - refv) / refv;
                    if e.abs() > worst.abs() {
                        worst = e;
                    }
                    sum += e;
                }
                let idx = (l * MAP_SIZE + r) * MAP_SIZE + c;
                if excluded {
                    near_zero.push((l, r, c));
                    continue;
                }
                max_pct[idx] = worst;
                timeavg_pct[idx] = sum / pairs.len() as f64;
            }
        }
    }
    let summarized = match mode {
        ErrorMode::Max => &max_pct,
        ErrorMode::Timeavg => &timeavg_pct,
    };
    let abs_layer_avg = layer_means(summarized, f64::abs);
    let (reference_label, compare_label) = match reference {
        Reference::A => (a.fidelity.clone(), b.fidelity.clone()),
        Reference::B => (b.fidelity.clone(), a.fidelity.clone()),
    };
    Ok(ErrorMaps { max_pct, timeavg_pct, abs_layer_avg, mode, near_zero, reference_label, compare_label })
}
