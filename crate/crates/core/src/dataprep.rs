//! Masks, normalizations, splits and model-ready samples, plus synthetic
//! datasets that need no solver run.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::init_seed;
use crate::geometry::{AssemblyMap, Grid15, MAP_SIZE};
use crate::probes::{FlowDataset, LAYERS};

/// Cells per level plane.
pub const PLANE: usize = MAP_SIZE * MAP_SIZE;
/// Lower bound on a level's standard deviation (kg/s).
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("level {0} is outside the dataset's {LAYERS} layers")]
    LevelOutOfRange(usize),
    #[error("level {0} has fewer than two observed training values")]
    InsufficientData(usize),
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("hidden cells must lie inside the geometry")]
    MissOutsideGeometry,
    #[error("time range {0:?} exceeds the dataset length {1}")]
    RangeOutOfBounds(Range<usize>, usize),
    #[error("normalization covers {found} features, the data has {expected}")]
    NormMismatch { expected: usize, found: usize },
}

/// Geometry, hidden and observed cells; `obs = geom ∧ ¬miss`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    pub geom: Grid15<bool>,
    pub miss: Grid15<bool>,
    pub obs: Grid15<bool>,
}

impl MaskSet {
    pub fn new(geom: Grid15<bool>, miss: Grid15<bool>) -> Result<Self, DataError> {
        let mut obs = [[false; MAP_SIZE]; MAP_SIZE];
        for r in 0..MAP_SIZE {
            for c in 0..MAP_SIZE {
                if miss[r][c] && !geom[r][c] {
                    return Err(DataError::MissOutsideGeometry);
                }
                obs[r][c] = geom[r][c] && !miss[r][c];
            }
        }
        Ok(Self { geom, miss, obs })
    }

    pub fn hidden_count(&self) -> usize {
        self.miss.iter().flatten().filter(|v| **v).count()
    }

    pub fn valid_count(&self) -> usize {
        self.geom.iter().flatten().filter(|v| **v).count()
    }

    /// Cell-wise check of `obs = geom ∧ ¬miss` and `miss ⊆ geom`.
    pub fn is_consistent(&self) -> bool {
        (0..PLANE).all(|i| {
            let (r, c) = (i / MAP_SIZE, i % MAP_SIZE);
            self.obs[r][c] == (self.geom[r][c] && !self.miss[r][c]) && (!self.miss[r][c] || self.geom[r][c])
        })
    }
}

/// Hides the valid cells with `(row + col + phase)` even.
pub fn checkerboard_masks(geom: &Grid15<bool>, phase: u8) -> MaskSet {
    let mut miss = [[false; MAP_SIZE]; MAP_SIZE];
    for r in 0..MAP_SIZE {
        for c in 0..MAP_SIZE {
            miss[r][c] = geom[r][c] && (r + c + phase as usize) % 2 == 0;
        }
    }
    MaskSet::new(*geom, miss).expect("checkerboard stays inside the geometry")
}

/// Contiguous train/validation/test ranges with boundaries
/// `floor(f_train T)` and `floor((f_train + f_val) T)`.
pub fn split_sequential(t_len: usize, fractions: [f64; 3]) -> Result<[Range<usize>; 3], DataError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions(fractions));
    }
    // The relative nudge keeps products like 0.45 * 10000 from flooring to 4499.
    let cut = |f: f64| (libm::floor(f * t_len as f64 * (1.0 + 1e-12)) as usize).min(t_len);
    let a = cut(fractions[0]);
    let b = cut(fractions[0] + fractions[1]).max(a);
    Ok([0..a, a..b, b..t_len])
}

/// Per-level z-score statistics fitted on observed training cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelNorm {
    /// Dataset layer of each normalized level.
    pub levels: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Levels whose observed training values were all equal; their σ was
    /// floored.
    pub degenerate: Vec<usize>,
}

impl LevelNorm {
    /// Population mean and standard deviation over `obs` cells of the
    /// steps in `train`.
    pub fn fit(ds: &FlowDataset, levels: &[usize], obs: &Grid15<bool>, train: Range<usize>) -> Result<Self, DataError> {
        check_range(ds, &train)?;
        let mut out = Self { levels: levels.to_vec(), mean: Vec::new(), std: Vec::new(), degenerate: Vec::new() };
        for &l in levels {
            if l >= LAYERS {
                return Err(DataError::LevelOutOfRange(l));
            }
            let mut n = 0usize;
            let mut sum = 0.0;
            for t in train.clone() {
                for (r, c) in cells_of(obs) {
                    sum += ds.get(t, l, r, c) as f64;
                    n += 1;
                }
            }
            if n < 2 {
                return Err(DataError::InsufficientData(l));
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for t in train.clone() {
                for (r, c) in cells_of(obs) {
                    let d = ds.get(t, l, r, c) as f64 - mean;
                    ss += d * d;
                }
            }
            let mut std = libm::sqrt(ss / n as f64);
            if std < SIGMA_FLOOR {
                std = SIGMA_FLOOR;
                out.degenerate.push(l);
            }
            out.mean.push(mean);
            out.std.push(std);
        }
        Ok(out)
    }

    /// z-score of `x` at level index `k` (position in `levels`).
    pub fn apply(&self, k: usize, x: f64) -> f64 {
        (x - self.mean[k]) / self.std[k]
    }

    pub fn invert(&self, k: usize, z: f64) -> f64 {
        z * self.std[k] + self.mean[k]
    }
}

/// Per-feature scaling to `[0, 1]`; features with `max == min` map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNorm {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxNorm {
    /// Fits on rows `train` of a row-major `[t][feature]` table.
    pub fn fit(table: &[f64], n_features: usize, train: Range<usize>) -> Self {
        let mut min = vec![f64::INFINITY; n_features];
        let mut max = vec![f64::NEG_INFINITY; n_features];
        for t in train {
            for j in 0..n_features {
                let v = table[t * n_features + j];
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        for j in 0..n_features {
            if min[j] > max[j] {
                (min[j], max[j]) = (0.0, 0.0);
            }
        }
        Self { min, max }
    }

    pub fn apply(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            (x - self.min[j]) / span
        } else {
            0.0
        }
    }

    pub fn invert(&self, j: usize, y: f64) -> f64 {
        self.min[j] + y * (self.max[j] - self.min[j])
    }
}

fn cells_of(mask: &Grid15<bool>) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..PLANE).map(|i| (i / MAP_SIZE, i % MAP_SIZE)).filter(|(r, c)| mask[*r][*c])
}

fn check_range(ds: &FlowDataset, range: &Range<usize>) -> Result<(), DataError> {
    if range.end > ds.t_len {
        return Err(DataError::RangeOutOfBounds(range.clone(), ds.t_len));
    }
    Ok(())
}

/// One reconstruction example. Arrays are row-major over
/// `[channel][level][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintSample {
    pub t: usize,
    pub levels: usize,
    /// `z ⊙ M_obs`, `M_obs`, `M_geom`, then optionally `row / 15` and
    /// `col / 15`.
    pub input: Vec<f32>,
    pub channels: usize,
    /// `z ⊙ M_geom`.
    pub target: Vec<f32>,
    /// 1 at hidden cells.
    pub miss: Vec<f32>,
}

impl InpaintSample {
    pub fn input_dims(&self) -> [usize; 5] {
        [1, self.channels, self.levels, MAP_SIZE, MAP_SIZE]
    }

    pub fn target_dims(&self) -> [usize; 5] {
        [1, 1, self.levels, MAP_SIZE, MAP_SIZE]
    }
}

/// One sample per step of `range`, normalized with `norm` (fitted for the
/// same `levels`).
pub fn make_inpaint_samples(
    ds: &FlowDataset,
    levels: &[usize],
    masks: &MaskSet,
    norm: &LevelNorm,
    range: Range<usize>,
    coord_channels: bool,
) -> Result<Vec<InpaintSample>, DataError> {
    check_range(ds, &range)?;
    if let Some(l) = levels.iter().find(|l| **l >= LAYERS) {
        return Err(DataError::LevelOutOfRange(*l));
    }
    let nl = levels.len();
    let vol = nl * PLANE;
    let channels = if coord_channels { 5 } else { 3 };
    let mut out = Vec::with_capacity(range.len());
    for t in range {
        let mut input = vec![0.0f32; channels * vol];
        let mut target = vec![0.0f32; vol];
        let mut miss = vec![0.0f32; vol];
        for (k, &l) in levels.iter().enumerate() {
            for r in 0..MAP_SIZE {
                for c in 0..MAP_SIZE {
                    let i = k * PLANE + r * MAP_SIZE + c;
                    if masks.geom[r][c] {
                        let z = norm.apply(k, ds.get(t, l, r, c) as f64) as f32;
                        target[i] = z;
                        input[2 * vol + i] = 1.0;
                        if masks.obs[r][c] {
                            input[i] = z;
                            input[vol + i] = 1.0;
                        }
                        if masks.miss[r][c] {
                            miss[i] = 1.0;
                        }
                    }
                    if coord_channels {
                        input[3 * vol + i] = r as f32 / MAP_SIZE as f32;
                        input[4 * vol + i] = c as f32 / MAP_SIZE as f32;
                    }
                }
            }
        }
        out.push(InpaintSample { t, levels: nl, input, channels, target, miss });
    }
    Ok(out)
}

/// One layer's valid-cell series, min-max normalized per cell on the
/// training split.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastData {
    pub layer: usize,
    /// Valid cells in row-major order; the feature order of every vector.
    pub cells: Vec<(usize, usize)>,
    pub geom: Grid15<bool>,
    pub t_len: usize,
    /// Normalized `[t][cell]`.
    pub values: Vec<f32>,
    /// Raw `[t][cell]` in kg/s.
    pub raw: Vec<f64>,
    pub norm: MinMaxNorm,
    pub splits: [Range<usize>; 3],
}

impl ForecastData {
    pub fn new(ds: &FlowDataset, layer: usize, fractions: [f64; 3]) -> Result<Self, DataError> {
        if layer >= LAYERS {
            return Err(DataError::LevelOutOfRange(layer));
        }
        let cells: Vec<(usize, usize)> = cells_of(&ds.geom_mask).collect();
        let n = cells.len();
        let splits = split_sequential(ds.t_len, fractions)?;
        let mut raw = Vec::with_capacity(ds.t_len * n);
        for t in 0..ds.t_len {
            raw.extend(cells.iter().map(|(r, c)| ds.get(t, layer, *r, *c) as f64));
        }
        let norm = MinMaxNorm::fit(&raw, n, splits[0].clone());
        let values = raw.iter().enumerate().map(|(i, v)| norm.apply(i % n, *v) as f32).collect();
        Ok(Self { layer, cells, geom: ds.geom_mask, t_len: ds.t_len, values, raw, norm, splits })
    }

    /// Like [`ForecastData::new`] but normalized with stored parameters.
    pub fn with_norm(ds: &FlowDataset, layer: usize, fractions: [f64; 3], norm: MinMaxNorm) -> Result<Self, DataError> {
        let mut d = Self::new(ds, layer, fractions)?;
        let n = d.cells.len();
        if norm.min.len() != n || norm.max.len() != n {
            return Err(DataError::NormMismatch { expected: n, found: norm.min.len().min(norm.max.len()) });
        }
        d.values = d.raw.iter().enumerate().map(|(i, v)| norm.apply(i % n, *v) as f32).collect();
        d.norm = norm;
        Ok(d)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vector(&self, t: usize) -> &[f32] {
        &self.values[t * self.cells.len()..(t + 1) * self.cells.len()]
    }

    /// Scatters a cell vector onto the 15×15 grid, zero outside.
    pub fn to_grid(&self, v: &[f32]) -> Vec<f32> {
        let mut g = vec![0.0; PLANE];
        for (k, (r, c)) in self.cells.iter().enumerate() {
            g[r * MAP_SIZE + c] = v[k];
        }
        g
    }

    /// Gathers the valid cells of a 15×15 grid.
    pub fn from_grid(&self, g: &[f32]) -> Vec<f32> {
        self.cells.iter().map(|(r, c)| g[r * MAP_SIZE + c]).collect()
    }

    /// Target steps of `split` whose `lookback` preceding steps exist; the
    /// inputs may reach back before the split start.
    pub fn targets(&self, split: usize, lookback: usize) -> Range<usize> {
        let r = &self.splits[split];
        r.start.max(lookback)..r.end.max(r.start.max(lookback))
    }
}

/// Kind of synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Travelling waves whose short wavelengths fade with layer height.
    Drift,
    /// Advecting Gaussian blobs that spread with layer height.
    Blobs,
    /// Independent Gaussian noise per cell and step.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Mean assembly flow (kg/s).
    pub mean: f64,
    /// Noise standard deviation (kg/s).
    pub noise_std: f64,
    pub long_waves: usize,
    pub short_waves: usize,
    /// Summed relative amplitude of the long and short waves.
    pub long_amplitude: f64,
    pub short_amplitude: f64,
    /// Per-layer damping `exp(-layer |k|² diffusion)` of a wave with
    /// wavenumber `k` (rad/cell).
    pub diffusion: f64,
    /// Advection velocity (cells/step) along columns and rows.
    pub velocity: [f64; 2],
    pub blobs: usize,
    pub dt_record: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mean: 50.0,
            noise_std: 5.0,
            long_waves: 6,
            short_waves: 10,
            long_amplitude: 0.3,
            short_amplitude: 0.2,
            diffusion: 0.15,
            velocity: [0.13, 0.07],
            blobs: 12,
            dt_record: 0.01,
        }
    }
}

/// Deterministic synthetic dataset on the standard assembly map.
pub fn synth_dataset(kind: SynthKind, t_len: usize, seed: u64, cfg: &SynthConfig) -> FlowDataset {
    let geom = AssemblyMap::standard().valid;
    let mut ds = FlowDataset::empty(geom, 0.0, cfg.dt_record);
    let label = match kind {
        SynthKind::Drift => "drift",
        SynthKind::Blobs => "blobs",
        SynthKind::Noise => "noise",
    };
    ds.fidelity = format!("synthetic-{label}");
    ds.provenance = format!("synth:{label}:{t_len}:{seed}");
    ds.values.reserve(t_len * LAYERS * PLANE);
    let mut snap = vec![0.0f64; LAYERS * PLANE];
    match kind {
        SynthKind::Noise => {
            let mut rng = init_seed(seed, 0);
            let normal = Normal::new(cfg.mean, cfg.noise_std).expect("finite noise");
            for _ in 0..t_len {
                for v in snap.iter_mut() {
                    *v = normal.sample(&mut rng);
                }
                ds.push(&snap).expect("full snapshot");
            }
        }
        SynthKind::Drift => {
            let waves = draw_waves(seed, cfg);
            for t in 0..t_len {
                let shift = [cfg.velocity[0] * t as f64, cfg.velocity[1] * t as f64];
                for (i, v) in snap.iter_mut().enumerate() {
                    let l = i / PLANE;
                    let (x, y) = (((i % PLANE) % MAP_SIZE) as f64 - shift[0], ((i % PLANE) / MAP_SIZE) as f64 - shift[1]);
                    let s: f64 = waves
                        .iter()
                        .map(|w| {
                            let k2 = w.k[0] * w.k[0] + w.k[1] * w.k[1];
                            w.amp * libm::exp(-(l as f64) * k2 * cfg.diffusion) * libm::sin(w.k[0] * x + w.k[1] * y + w.phase)
                        })
                        .sum();
                    *v = cfg.mean * (1.0 + s);
                }
                ds.push(&snap).expect("full snapshot");
            }
        }
        SynthKind::Blobs => {
            let blobs = draw_blobs(seed, cfg);
            let n = MAP_SIZE as f64;
            // Minimum-image distance on the periodic 15×15 tile.
            let wrap = |d: f64| d - n * libm::round(d / n);
            for t in 0..t_len {
                for (i, v) in snap.iter_mut().enumerate() {
                    let l = i / PLANE;
                    let (x, y) = (((i % PLANE) % MAP_SIZE) as f64, ((i % PLANE) / MAP_SIZE) as f64);
                    let s: f64 = blobs
                        .iter()
                        .map(|b| {
                            let w2 = b.width * b.width + 2.0 * cfg.diffusion * l as f64;
                            let dx = wrap(x - b.center[0] - b.velocity[0] * t as f64);
                            let dy = wrap(y - b.center[1] - b.velocity[1] * t as f64);
                            b.amp * (b.width * b.width / w2) * libm::exp(-(dx * dx + dy * dy) / (2.0 * w2))
                        })
                        .sum();
                    *v = cfg.mean * (1.0 + s);
                }
                ds.push(&snap).expect("full snapshot");
            }
        }
    }
    ds
}

struct Wave {
    k: [f64; 2],
    amp: f64,
    phase: f64,
}

fn draw_waves(seed: u64, cfg: &SynthConfig) -> Vec<Wave> {
    let mut rng = init_seed(seed, 1);
    let angle = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let weight = Uniform::new(0.5, 1.0).expect("valid range");
    let mut band = |count: usize, k_lo: f64, k_hi: f64, total: f64| -> Vec<Wave> {
        let kd = Uniform::new(k_lo, k_hi).expect("valid range");
        let mut ws: Vec<Wave> = (0..count)
            .map(|_| {
                let (k, th) = (kd.sample(&mut rng), angle.sample(&mut rng));
                Wave { k: [k * libm::cos(th), k * libm::sin(th)], amp: weight.sample(&mut rng), phase: angle.sample(&mut rng) }
            })
            .collect();
        let sum: f64 = ws.iter().map(|w| w.amp).sum();
        ws.iter_mut().for_each(|w| w.amp *= total / sum.max(f64::MIN_POSITIVE));
        ws
    };
    let mut waves = band(cfg.long_waves, 0.25, 0.7, cfg.long_amplitude);
    waves.extend(band(cfg.short_waves, 1.4, 2.6, cfg.short_amplitude));
    waves
}

struct Blob {
    center: [f64; 2],
    velocity: [f64; 2],
    width: f64,
    amp: f64,
}

fn draw_blobs(seed: u64, cfg: &SynthConfig) -> Vec<Blob> {
    let mut rng = init_seed(seed, 2);
    let pos = Uniform::new(0.0, MAP_SIZE as f64).expect("valid range");
    let jitter = Uniform::new(-0.05, 0.05).expect("valid range");
    let width = Uniform::new(0.8, 2.0).expect("valid range");
    let amp = Uniform::new(-1.0, 1.0).expect("valid range");
    let scale = cfg.long_amplitude / libm::sqrt(cfg.blobs.max(1) as f64);
    (0..cfg.blobs)
        .map(|_| Blob {
            center: [pos.sample(&mut rng), pos.sample(&mut rng)],
            velocity: [cfg.velocity[0] + jitter.sample(&mut rng), cfg.velocity[1] + jitter.sample(&mut rng)],
            width: width.sample(&mut rng),
            amp: scale * amp.sample(&mut rng),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> Grid15<bool> {
        AssemblyMap::standard().valid
    }

    #[test]
    fn checkerboard_on_small_square_and_standard_map() {
        let mut g = [[false; MAP_SIZE]; MAP_SIZE];
        (g[0][0], g[0][1], g[1][0], g[1][1]) = (true, true, true, true);
        let m = checkerboard_masks(&g, 0);
        assert_eq!((m.hidden_count(), m.valid_count()), (2, 4));
        for phase in [0, 1] {
            let m = checkerboard_masks(&geom(), phase);
            assert!(m.is_consistent());
            let frac = m.hidden_count() as f64 / m.valid_count() as f64;
            assert!(matches!(m.hidden_count(), 96 | 97));
            assert!((frac - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn miss_outside_geometry_rejected() {
        let mut miss = [[false; MAP_SIZE]; MAP_SIZE];
        miss[0][0] = true;
        assert_eq!(MaskSet::new(geom(), miss), Err(DataError::MissOutsideGeometry));
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sequential(10000, [0.45, 0.10, 0.45]).unwrap(), [0..4500, 4500..5500, 5500..10000]);
        assert_eq!(split_sequential(10, [0.6, 0.2, 0.2]).unwrap(), [0..6, 6..8, 8..10]);
        assert_eq!(split_sequential(0, [0.6, 0.2, 0.2]).unwrap(), [0..0, 0..0, 0..0]);
        assert!(split_sequential(10, [0.6, 0.2, 0.3]).is_err());
    }

    #[test]
    fn splits_partition_every_length() {
        for t in 0..1000 {
            for f in [[0.45, 0.10, 0.45], [0.6, 0.2, 0.2]] {
                let [a, b, c] = split_sequential(t, f).unwrap();
                assert_eq!((a.start, a.end, b.end, c.end), (0, b.start, c.start, t));
            }
        }
    }

    fn dataset_from(f: impl Fn(usize, usize, usize, usize) -> f64, t_len: usize) -> FlowDataset {
        let mut ds = FlowDataset::empty(geom(), 0.0, 0.01);
        for t in 0..t_len {
            let snap: Vec<f64> = (0..LAYERS * PLANE).map(|i| f(t, i / PLANE, (i % PLANE) / MAP_SIZE, i % MAP_SIZE)).collect();
            ds.push(&snap).unwrap();
        }
        ds
    }

    #[test]
    fn zscore_examples() {
        let ds = dataset_from(|_, _, _, _| 7.0, 3);
        let m = checkerboard_masks(&geom(), 0);
        let n = LevelNorm::fit(&ds, &[0], &m.obs, 0..3).unwrap();
        assert_eq!((n.mean[0], n.std[0], n.degenerate.clone()), (7.0, SIGMA_FLOOR, vec![0]));
        assert_eq!(n.apply(0, 7.0), 0.0);
        let ds = dataset_from(|t, _, _, _| if t == 0 { 1.0 } else { 3.0 }, 2);
        let n = LevelNorm::fit(&ds, &[2], &m.obs, 0..2).unwrap();
        assert_eq!((n.mean[0], n.std[0]), (2.0, 1.0));
        assert_eq!((n.apply(0, 1.0), n.apply(0, 3.0)), (-1.0, 1.0));
        assert_eq!(LevelNorm::fit(&ds, &[9], &m.obs, 0..2), Err(DataError::LevelOutOfRange(9)));
    }

    #[test]
    fn zscore_ignores_hidden_cells_and_later_steps() {
        let m = checkerboard_masks(&geom(), 0);
        let base = synth_dataset(SynthKind::Noise, 20, 3, &SynthConfig::default());
        let fit = |ds: &FlowDataset| LevelNorm::fit(ds, &[0, 1, 2, 3], &m.obs, 0..9).unwrap();
        let mut perturbed = base.clone();
        for t in 0..20 {
            for l in 0..LAYERS {
                for r in 0..MAP_SIZE {
                    for c in 0..MAP_SIZE {
                        let i = ((t * LAYERS + l) * MAP_SIZE + r) * MAP_SIZE + c;
                        if t >= 9 || m.miss[r][c] {
                            perturbed.values[i] += 1000.0;
                        }
                    }
                }
            }
        }
        assert_eq!(fit(&base), fit(&perturbed));
    }

    #[test]
    fn minmax_examples() {
        let n = MinMaxNorm::fit(&[2.0, 5.0, 4.0, 5.0, 6.0, 5.0], 2, 0..3);
        assert_eq!([n.apply(0, 2.0), n.apply(0, 4.0), n.apply(0, 6.0)], [0.0, 0.5, 1.0]);
        assert_eq!(n.apply(1, 5.0), 0.0);
        assert_eq!(n.invert(0, n.apply(0, 3.3)), 3.3);
    }

    #[test]
    fn inpaint_sample_layout() {
        let ds = synth_dataset(SynthKind::Drift, 4, 1, &SynthConfig::default());
        let m = checkerboard_masks(&geom(), 0);
        let levels = [0, 1, 2, 3];
        let norm = LevelNorm::fit(&ds, &levels, &m.obs, 0..2).unwrap();
        let s = make_inpaint_samples(&ds, &levels, &m, &norm, 0..4, false).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].input_dims(), [1, 3, 4, 15, 15]);
        let vol = 4 * PLANE;
        for smp in &s {
            for i in 0..vol {
                let (r, c) = ((i % PLANE) / MAP_SIZE, i % MAP_SIZE);
                if m.miss[r][c] {
                    assert_eq!(smp.input[i], 0.0);
                    assert_eq!(smp.miss[i], 1.0);
                }
                if !m.geom[r][c] {
                    assert_eq!(smp.target[i], 0.0);
                }
                if m.obs[r][c] {
                    assert_eq!(smp.input[i], smp.target[i]);
                }
            }
        }
        let s = make_inpaint_samples(&ds, &levels, &m, &norm, 0..1, true).unwrap();
        assert_eq!(s[0].channels, 5);
        assert!(matches!(make_inpaint_samples(&ds, &levels, &m, &norm, 0..5, false), Err(DataError::RangeOutOfBounds(..))));
    }

    #[test]
    fn synthetic_datasets() {
        let cfg = SynthConfig::default();
        for kind in [SynthKind::Drift, SynthKind::Blobs, SynthKind::Noise] {
            let a = synth_dataset(kind, 30, 7, &cfg);
            assert_eq!(a, synth_dataset(kind, 30, 7, &cfg));
            assert!(a.is_consistent());
            assert!(a.values.iter().all(|v| *v >= 0.0 || kind == SynthKind::Noise));
        }
        let d = synth_dataset(SynthKind::Drift, 50, 7, &cfg);
        let spatial_var = |l: usize| {
            let mut acc = 0.0;
            for t in 0..d.t_len {
                let v: Vec<f64> = cells_of(&d.geom_mask).map(|(r, c)| d.get(t, l, r, c) as f64).collect();
                let m = v.iter().sum::<f64>() / v.len() as f64;
                acc += v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
            }
            acc
        };
        assert!(spatial_var(8) < spatial_var(0));
    }

    #[test]
    fn noise_statistics() {
        let cfg = SynthConfig::default();
        let t_len = 100;
        let d = synth_dataset(SynthKind::Noise, t_len, 11, &cfg);
        let bound = 3.0 * cfg.noise_std / (t_len as f64).sqrt();
        let (mut outside, mut cells, mut grand) = (0usize, 0usize, 0.0);
        for l in 0..LAYERS {
            for (r, c) in cells_of(&d.geom_mask) {
                let m = (0..t_len).map(|t| d.get(t, l, r, c) as f64).sum::<f64>() / t_len as f64;
                grand += m;
                cells += 1;
                if (m - cfg.mean).abs() > bound {
                    outside += 1;
                }
            }
        }
        // Each cell leaves the 3σ band with probability 0.27%.
        assert!((outside as f64) < 0.01 * cells as f64, "{outside} of {cells}");
        let grand = grand / cells as f64;
        assert!((grand - cfg.mean).abs() < 3.0 * cfg.noise_std / ((t_len * cells) as f64).sqrt());
    }

    #[test]
    fn forecast_data_normalizes_on_train_split() {
        let ds = synth_dataset(SynthKind::Drift, 20, 2, &SynthConfig::default());
        let f = ForecastData::new(&ds, 0, [0.6, 0.2, 0.2]).unwrap();
        assert_eq!(f.n_cells(), 193);
        assert_eq!(f.splits, [0..12, 12..16, 16..20]);
        let train = &f.values[..12 * 193];
        assert!(train.iter().all(|v| (0.0..=1.0).contains(v)));
        let v = f.vector(3).to_vec();
        assert_eq!(f.from_grid(&f.to_grid(&v)), v);
        assert_eq!(f.targets(0, 1), 1..12);
        assert_eq!(f.targets(2, 1), 16..20);
    }
}
