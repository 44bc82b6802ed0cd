//! MAE, MAPE and R² over masked assembly fields.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{Grid15, MAP_SIZE};

/// Truth values below this magnitude (kg/s) are left out of the MAPE.
pub const MAPE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("mask selects no values")]
    EmptyMask,
    #[error("prediction and truth lengths differ: {0} vs {1}")]
    ShapeMismatch(usize, usize),
}

/// Quartiles and Tukey whiskers of one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub whisker_low: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_high: f64,
    pub max: f64,
}

impl BoxStats {
    /// `None` for an empty sample. Quartiles interpolate linearly between
    /// order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let x = p * (v.len() - 1) as f64;
            let lo = libm::floor(x) as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (x - lo as f64) * (v[hi] - v[lo])
        };
        let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
        let iqr = q3 - q1;
        let whisker_low = *v.iter().find(|x| **x >= q1 - 1.5 * iqr).unwrap();
        let whisker_high = *v.iter().rev().find(|x| **x <= q3 + 1.5 * iqr).unwrap();
        Some(Self { min: v[0], whisker_low, q1, median, q3, whisker_high, max: v[v.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    /// Percent.
    pub mape: f64,
    pub r2: f64,
    /// Contributing (cell, step) pairs.
    pub n: usize,
    /// Pairs left out of the MAPE because the truth was below [`MAPE_FLOOR`].
    pub excluded: usize,
    pub per_cell_mape: Option<Grid15<f64>>,
    pub per_layer_boxstats: Option<Vec<Option<BoxStats>>>,
}

/// Metrics over every position where `mask` is true. For zero-variance
/// truth, R² is 1 when the prediction is exact and `-inf` otherwise.
pub fn compute_metrics(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<MetricReport, MetricsError> {
    if pred.len() != truth.len() || mask.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch(pred.len(), truth.len()));
    }
    let mut n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_n = 0usize;
    let mut truth_sum = 0.0;
    for i in 0..truth.len() {
        if !mask[i] {
            continue;
        }
        let e = pred[i] - truth[i];
        n += 1;
        abs_sum += e.abs();
        sq_sum += e * e;
        truth_sum += truth[i];
        if truth[i].abs() >= MAPE_FLOOR {
            ape_sum += e.abs() / truth[i].abs();
            ape_n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let mean = truth_sum / n as f64;
    let sst: f64 = truth.iter().zip(mask).filter(|(_, m)| **m).map(|(t, _)| (t - mean) * (t - mean)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sq_sum / sst
    } else if sq_sum == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(MetricReport {
        mae: abs_sum / n as f64,
        mape: if ape_n > 0 { 100.0 * ape_sum / ape_n as f64 } else { 0.0 },
        r2,
        n,
        excluded: n - ape_n,
        per_cell_mape: None,
        per_layer_boxstats: None,
    })
}

/// Per-cell MAPE over time for fields laid out `[t][row][col]`; cells
/// outside `geom` or with no usable truth are `NaN`.
pub fn per_cell_mape(pred: &[f64], truth: &[f64], geom: &Grid15<bool>) -> Grid15<f64> {
    let plane = MAP_SIZE * MAP_SIZE;
    let steps = truth.len() / plane;
    let mut out = [[f64::NAN; MAP_SIZE]; MAP_SIZE];
    for r in 0..MAP_SIZE {
        for c in 0..MAP_SIZE {
            if !geom[r][c] {
                continue;
            }
            let (mut s, mut n) = (0.0, 0usize);
            for t in 0..steps {
                let i = t * plane + r * MAP_SIZE + c;
                if truth[i].abs() >= MAPE_FLOOR {
                    s += (pred[i] - truth[i]).abs() / truth[i].abs();
                    n += 1;
                }
            }
            if n > 0 {
                out[r][c] = 100.0 * s / n as f64;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let m = compute_metrics(&[11.0, 18.0], &[10.0, 20.0], &[true, true]).unwrap();
        assert!((m.mae - 1.5).abs() < 1e-12);
        assert!((m.mape - 10.0).abs() < 1e-12);
        assert!((m.r2 - 0.9).abs() < 1e-12);
        assert_eq!(m.n, 2);
    }

    #[test]
    fn exact_and_mean_predictions() {
        let t = [1.0, 2.0, 4.0];
        let m = compute_metrics(&t, &t, &[true; 3]).unwrap();
        assert_eq!((m.mae, m.mape, m.r2), (0.0, 0.0, 1.0));
        let mean = 7.0 / 3.0;
        let m = compute_metrics(&[mean; 3], &t, &[true; 3]).unwrap();
        assert!(m.r2.abs() < 1e-12);
    }

    #[test]
    fn zero_variance_convention() {
        assert_eq!(compute_metrics(&[3.0, 3.0], &[3.0, 3.0], &[true; 2]).unwrap().r2, 1.0);
        assert_eq!(compute_metrics(&[3.0, 4.0], &[3.0, 3.0], &[true; 2]).unwrap().r2, f64::NEG_INFINITY);
    }

    #[test]
    fn empty_mask_and_floor() {
        assert_eq!(compute_metrics(&[1.0], &[1.0], &[false]), Err(MetricsError::EmptyMask));
        let m = compute_metrics(&[1.0, 2.0], &[0.0, 1.0], &[true, true]).unwrap();
        assert_eq!(m.excluded, 1);
        assert!((m.mape - 100.0).abs() < 1e-12);
    }

    #[test]
    fn box_stats_of_small_sample() {
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!(b.whisker_high, 4.0);
        assert_eq!(b.max, 100.0);
        assert!(BoxStats::of(&[]).is_none());
    }
}
