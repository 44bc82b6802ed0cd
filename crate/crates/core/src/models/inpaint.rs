use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::{ConvSpec, Graph, ParamStore, Real, Tensor, Var};
use crate::dataprep::{InpaintSample, LevelNorm, MaskSet};

/// Residual dilated 3-D network hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    pub in_channels: usize,
    pub channels: usize,
    pub blocks: usize,
    pub groups: usize,
    pub dropout: f64,
    /// In-plane dilations cycled over the blocks; the axial dilation is 1.
    pub dilations: [usize; 3],
    pub gn_eps: f64,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self { in_channels: 3, channels: 64, blocks: 6, groups: 8, dropout: 0.1, dilations: [1, 2, 4], gn_eps: 1e-5 }
    }
}

/// Stem convolution, residual dilated blocks and a 1×1×1 head, wrapped in
/// the copy-through rule `ŷ = z ⊙ M_obs + M_miss ⊙ f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintNet<T> {
    pub cfg: InpaintConfig,
    pub params: ParamStore<T>,
}

// Parameter layout: stem w, b; per block w1, b1, g1, be1, w2, b2, g2, be2;
// head w, b.
const PER_BLOCK: usize = 8;

impl<T: Real> InpaintNet<T> {
    pub fn new(cfg: InpaintConfig, seed: u64) -> Result<Self, ModelError> {
        let c = cfg.channels;
        if cfg.groups == 0 || c % cfg.groups != 0 {
            return Err(crate::autodiff::AutodiffError::BadGroupCount { channels: c, groups: cfg.groups }.into());
        }
        let mut p = ParamStore::new(seed);
        p.uniform("stem.w", &[c, cfg.in_channels, 3, 3, 3], cfg.in_channels * 27);
        p.zeros("stem.b", &[c]);
        for b in 0..cfg.blocks {
            for half in 1..=2 {
                p.uniform(&alloc::format!("block{b}.conv{half}.w"), &[c, c, 3, 3, 3], c * 27);
                p.zeros(&alloc::format!("block{b}.conv{half}.b"), &[c]);
                p.ones(&alloc::format!("block{b}.norm{half}.gamma"), &[c]);
                p.zeros(&alloc::format!("block{b}.norm{half}.beta"), &[c]);
            }
        }
        p.uniform("head.w", &[1, c, 1, 1, 1], c);
        p.zeros("head.b", &[1]);
        Ok(Self { cfg, params: p })
    }

    /// Raw network output `f(x)` of shape `[N, 1, L, H, W]` for input
    /// `[N, C_in, L, H, W]`, with parameters bound in store order.
    pub fn network(&self, g: &mut Graph<T>, p: &[Var], x: Var, training: bool, seed: u64) -> Result<Var, ModelError> {
        let cfg = &self.cfg;
        let stem = ConvSpec::same([3, 3, 3], [1, 1, 1]);
        let h = g.conv(x, p[0], Some(p[1]), stem)?;
        let mut h = g.silu(h);
        for b in 0..cfg.blocks {
            let d = cfg.dilations[b % 3];
            let spec = ConvSpec::same([3, 3, 3], [1, d, d]);
            let q = &p[2 + b * PER_BLOCK..2 + (b + 1) * PER_BLOCK];
            let y = g.conv(h, q[0], Some(q[1]), spec)?;
            let y = g.group_norm(y, cfg.groups, q[2], q[3], cfg.gn_eps)?;
            let y = g.silu(y);
            let y = g.dropout(y, cfg.dropout, training, seed.wrapping_add(b as u64))?;
            let y = g.conv(y, q[4], Some(q[5]), spec)?;
            let y = g.group_norm(y, cfg.groups, q[6], q[7], cfg.gn_eps)?;
            let s = g.add(h, y)?;
            h = g.silu(s);
        }
        let n = p.len();
        Ok(g.conv(h, p[n - 2], Some(p[n - 1]), ConvSpec::default())?)
    }

    /// Copy-through prediction inside the graph; `miss` is 1 at hidden
    /// cells and shaped like the output.
    pub fn predict_graph(&self, g: &mut Graph<T>, p: &[Var], x: Var, miss: Vec<T>, training: bool, seed: u64) -> Result<Var, ModelError> {
        let f = self.network(g, p, x, training, seed)?;
        let observed = g.slice(x, 0, 1)?;
        let fill = g.mul_const(f, miss)?;
        Ok(g.add(observed, fill)?)
    }

    /// Inference on one sample: hidden cells take the network output,
    /// every other cell copies input channel 0 bit for bit.
    pub fn predict(&self, s: &InpaintSample) -> Result<Vec<T>, ModelError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let x = g.constant(Tensor::new(&s.input_dims(), s.input.iter().map(|v| T::of(*v as f64)).collect())?);
        let f = self.network(&mut g, &p, x, false, 0)?;
        let vol = s.miss.len();
        Ok((0..vol).map(|i| if s.miss[i] != 0.0 { g.value(f)[i] } else { T::of(s.input[i] as f64) }).collect())
    }
}

/// `Σ ((ŷ - y) ⊙ M)² / Σ M`.
pub fn masked_mse<T: Real>(g: &mut Graph<T>, pred: Var, target: Var, miss: Vec<T>) -> Result<Var, ModelError> {
    let denom: T = miss.iter().copied().sum();
    if denom <= T::zero() {
        return Err(ModelError::EmptyMask);
    }
    let d = g.sub(pred, target)?;
    let dm = g.mul_const(d, miss)?;
    let sq = g.mul(dm, dm)?;
    let s = g.sum(sq);
    Ok(g.scale(s, T::one() / denom))
}

/// Samples of the three splits with the masks and normalization that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintData {
    pub splits: [Vec<InpaintSample>; 3],
    pub masks: MaskSet,
    pub norm: LevelNorm,
}

impl InpaintData {
    /// Stacks samples into input, target and mask arrays.
    pub fn batch<T: Real>(&self, split: usize, idx: &[usize]) -> Result<(Tensor<T>, Tensor<T>, Vec<T>), ModelError> {
        let s0 = self.splits[split].first().ok_or(ModelError::EmptySplit("requested"))?;
        let [_, c, l, h, w] = s0.input_dims();
        let n = idx.len();
        let conv = |v: &f32| T::of(*v as f64);
        let mut x = Vec::with_capacity(n * s0.input.len());
        let mut y = Vec::with_capacity(n * s0.target.len());
        let mut m = Vec::with_capacity(n * s0.miss.len());
        for &i in idx {
            let s = &self.splits[split][i];
            x.extend(s.input.iter().map(conv));
            y.extend(s.target.iter().map(conv));
            m.extend(s.miss.iter().map(conv));
        }
        Ok((Tensor::new(&[n, c, l, h, w], x)?, Tensor::new(&[n, 1, l, h, w], y)?, m))
    }
}
