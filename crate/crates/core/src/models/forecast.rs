use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::{AutodiffError, ConvSpec, Graph, ParamStore, Real, Tensor, Var};
use crate::dataprep::{ForecastData, PLANE};
use crate::geometry::MAP_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecasterKind {
    Lstm,
    ConvLstm,
    DeepONet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: usize,
    pub layers: usize,
    pub head_hidden: usize,
    pub lookback: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self { hidden: 128, layers: 2, head_hidden: 128, lookback: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvLstmConfig {
    pub hidden: usize,
    pub layers: usize,
    pub kernel: usize,
    pub lookback: usize,
}

impl Default for ConvLstmConfig {
    fn default() -> Self {
        Self { hidden: 128, layers: 2, kernel: 3, lookback: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepONetConfig {
    pub hidden: [usize; 2],
    pub branch_latent: usize,
    pub trunk_latent: usize,
    pub lookback: usize,
}

impl Default for DeepONetConfig {
    fn default() -> Self {
        Self { hidden: [128, 256], branch_latent: 128, trunk_latent: 128, lookback: 1 }
    }
}

/// Gate pre-activations `[N, 4H, ...]` ordered input, forget, output,
/// candidate, to the next hidden and cell states.
fn lstm_update<T: Real>(g: &mut Graph<T>, z: Var, c: Var, hidden: usize) -> Result<(Var, Var), AutodiffError> {
    let zi = g.slice(z, 0, hidden)?;
    let zf = g.slice(z, hidden, hidden)?;
    let zo = g.slice(z, 2 * hidden, hidden)?;
    let zg = g.slice(z, 3 * hidden, hidden)?;
    let (i, f, o, cand) = (g.sigmoid(zi), g.sigmoid(zf), g.sigmoid(zo), g.tanh(zg));
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c2 = g.add(keep, write)?;
    let tc = g.tanh(c2);
    let h2 = g.mul(o, tc)?;
    Ok((h2, c2))
}

/// One ConvLSTM step: gates from a same-padded convolution of `[x, h]`,
/// then `c' = f ⊙ c + i ⊙ g` and `h' = o ⊙ tanh(c')`.
pub fn convlstm_cell_step<T: Real>(g: &mut Graph<T>, x: Var, h: Var, c: Var, w: Var, b: Var) -> Result<(Var, Var), AutodiffError> {
    let hidden = g.dims(h)[1];
    let k = g.dims(w)[2];
    let xh = g.concat(&[x, h])?;
    let z = g.conv(xh, w, Some(b), ConvSpec::same([1, k, k], [1; 3]))?;
    lstm_update(g, z, c, hidden)
}

fn zeros<T: Real>(g: &mut Graph<T>, dims: &[usize]) -> Var {
    g.constant(Tensor::zeros(dims))
}

/// Two stacked LSTM layers over valid-cell vectors with a GELU head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet<T> {
    pub cfg: LstmConfig,
    pub n_cells: usize,
    pub params: ParamStore<T>,
}

impl<T: Real> LstmNet<T> {
    pub fn new(cfg: LstmConfig, n_cells: usize, seed: u64) -> Self {
        let h = cfg.hidden;
        let mut p = ParamStore::new(seed);
        for l in 0..cfg.layers {
            let input = if l == 0 { n_cells } else { h };
            p.uniform(&format!("lstm{l}.w"), &[4 * h, input + h], h);
            p.zeros(&format!("lstm{l}.b"), &[4 * h]);
        }
        let hh = cfg.head_hidden;
        for (i, (o, inp)) in [(hh, h), (hh, hh), (n_cells, hh)].into_iter().enumerate() {
            p.uniform(&format!("head{i}.w"), &[o, inp], inp);
            p.zeros(&format!("head{i}.b"), &[o]);
        }
        Self { cfg, n_cells, params: p }
    }

    /// Output `[N, n_cells]` from a sequence of `[N, n_cells]` inputs.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], seq: &[Var]) -> Result<Var, ModelError> {
        let n = g.dims(seq[0])[0];
        let hd = self.cfg.hidden;
        let mut state: Vec<(Var, Var)> = (0..self.cfg.layers).map(|_| (zeros(g, &[n, hd]), zeros(g, &[n, hd]))).collect();
        let mut top = seq[0];
        for &x in seq {
            let mut inp = x;
            for (l, st) in state.iter_mut().enumerate() {
                let xh = g.concat(&[inp, st.0])?;
                let z = g.linear(xh, p[2 * l], Some(p[2 * l + 1]))?;
                *st = lstm_update(g, z, st.1, hd)?;
                inp = st.0;
            }
            top = inp;
        }
        let o = 2 * self.cfg.layers;
        let y = g.linear(top, p[o], Some(p[o + 1]))?;
        let y = g.gelu(y);
        let y = g.linear(y, p[o + 2], Some(p[o + 3]))?;
        let y = g.gelu(y);
        Ok(g.linear(y, p[o + 4], Some(p[o + 5]))?)
    }
}

/// Stacked ConvLSTM layers on the 15×15 grid with a 1×1 output
/// convolution. Input channels: masked field and geometry mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLstmNet<T> {
    pub cfg: ConvLstmConfig,
    pub params: ParamStore<T>,
}

/// Input channels of the ConvLSTM: field and geometry mask.
const CONV_INPUTS: usize = 2;

impl<T: Real> ConvLstmNet<T> {
    pub fn new(cfg: ConvLstmConfig, seed: u64) -> Self {
        let (h, k) = (cfg.hidden, cfg.kernel);
        let mut p = ParamStore::new(seed);
        for l in 0..cfg.layers {
            let input = if l == 0 { CONV_INPUTS } else { h };
            p.uniform(&format!("convlstm{l}.w"), &[4 * h, input + h, k, k], (input + h) * k * k);
            p.zeros(&format!("convlstm{l}.b"), &[4 * h]);
        }
        p.uniform("out.w", &[1, h, 1, 1], h);
        p.zeros("out.b", &[1]);
        Self { cfg, params: p }
    }

    /// Output `[N, 1, H, W]` from a sequence of `[N, 2, H, W]` inputs.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], seq: &[Var]) -> Result<Var, ModelError> {
        let d = g.dims(seq[0]).to_vec();
        let dims = [d[0], self.cfg.hidden, d[2], d[3]];
        let mut state: Vec<(Var, Var)> = (0..self.cfg.layers).map(|_| (zeros(g, &dims), zeros(g, &dims))).collect();
        let mut top = seq[0];
        for &x in seq {
            let mut inp = x;
            for (l, st) in state.iter_mut().enumerate() {
                *st = convlstm_cell_step(g, inp, st.0, st.1, p[2 * l], p[2 * l + 1])?;
                inp = st.0;
            }
            top = inp;
        }
        let o = 2 * self.cfg.layers;
        Ok(g.conv(top, p[o], Some(p[o + 1]), ConvSpec::default())?)
    }
}

/// Branch and trunk networks merged by an inner product over the latent
/// units, plus a scalar bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepONet<T> {
    pub cfg: DeepONetConfig,
    pub n_cells: usize,
    pub params: ParamStore<T>,
}

impl<T: Real> DeepONet<T> {
    pub fn new(cfg: DeepONetConfig, n_cells: usize, seed: u64) -> Result<Self, ModelError> {
        if cfg.branch_latent != cfg.trunk_latent {
            return Err(AutodiffError::ShapeMismatch("branch and trunk latent widths differ").into());
        }
        let mut p = ParamStore::new(seed);
        for (net, input, latent) in [("branch", n_cells * cfg.lookback, cfg.branch_latent), ("trunk", 2, cfg.trunk_latent)] {
            let widths = [input, cfg.hidden[0], cfg.hidden[1], latent];
            for i in 0..3 {
                p.uniform(&format!("{net}{i}.w"), &[widths[i + 1], widths[i]], widths[i]);
                p.zeros(&format!("{net}{i}.b"), &[widths[i + 1]]);
            }
        }
        p.zeros("bias", &[1]);
        Ok(Self { cfg, n_cells, params: p })
    }

    fn mlp(g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var, ModelError> {
        let mut y = x;
        for i in 0..3 {
            y = g.linear(y, p[2 * i], Some(p[2 * i + 1]))?;
            if i < 2 {
                y = g.gelu(y);
            }
        }
        Ok(y)
    }

    /// Output `[N, n_cells]` from branch input `[N, n_cells · lookback]`
    /// and trunk coordinates `[n_cells, 2]`.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], branch_in: Var, coords: Var) -> Result<Var, ModelError> {
        let b = Self::mlp(g, &p[0..6], branch_in)?;
        let t = Self::mlp(g, &p[6..12], coords)?;
        let u = g.matmul_t(b, t)?;
        let n = g.dims(u)[0];
        let flat = g.reshape(u, &[n * self.n_cells, 1])?;
        let flat = g.add_bias(flat, p[12])?;
        Ok(g.reshape(flat, &[n, self.n_cells])?)
    }
}

/// One-step forecaster of a single layer's valid-cell field.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster<T> {
    Lstm(LstmNet<T>),
    ConvLstm(ConvLstmNet<T>),
    DeepONet(DeepONet<T>),
}

impl<T: Real> Forecaster<T> {
    pub fn kind(&self) -> ForecasterKind {
        match self {
            Self::Lstm(_) => ForecasterKind::Lstm,
            Self::ConvLstm(_) => ForecasterKind::ConvLstm,
            Self::DeepONet(_) => ForecasterKind::DeepONet,
        }
    }

    pub fn params(&self) -> &ParamStore<T> {
        match self {
            Self::Lstm(m) => &m.params,
            Self::ConvLstm(m) => &m.params,
            Self::DeepONet(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        match self {
            Self::Lstm(m) => &mut m.params,
            Self::ConvLstm(m) => &mut m.params,
            Self::DeepONet(m) => &mut m.params,
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            Self::Lstm(m) => m.cfg.lookback,
            Self::ConvLstm(m) => m.cfg.lookback,
            Self::DeepONet(m) => m.cfg.lookback,
        }
        .max(1)
    }

    /// Normalized predictions `[N, n_cells]` of the steps `targets` from
    /// their true preceding steps.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], data: &ForecastData, targets: &[usize]) -> Result<Var, ModelError> {
        let k = self.lookback();
        let n = targets.len();
        let nc = data.n_cells();
        let of = |v: &f32| T::of(*v as f64);
        match self {
            Self::Lstm(m) => {
                let mut seq = Vec::with_capacity(k);
                for j in 0..k {
                    let x: Vec<T> = targets.iter().flat_map(|t| data.vector(t - k + j).iter().map(of)).collect();
                    seq.push(g.constant(Tensor::new(&[n, nc], x)?));
                }
                m.forward(g, p, &seq)
            }
            Self::ConvLstm(m) => {
                let geom: Vec<T> = (0..PLANE).map(|i| if data.geom[i / MAP_SIZE][i % MAP_SIZE] { T::one() } else { T::zero() }).collect();
                let mut seq = Vec::with_capacity(k);
                for j in 0..k {
                    let mut x = Vec::with_capacity(n * CONV_INPUTS * PLANE);
                    for t in targets {
                        x.extend(data.to_grid(data.vector(t - k + j)).iter().map(of));
                        x.extend_from_slice(&geom);
                    }
                    seq.push(g.constant(Tensor::new(&[n, CONV_INPUTS, MAP_SIZE, MAP_SIZE], x)?));
                }
                let y = m.forward(g, p, &seq)?;
                let idx = (0..n).flat_map(|s| data.cells.iter().map(move |(r, c)| s * PLANE + r * MAP_SIZE + c)).collect();
                Ok(g.gather(y, idx, Some(&[n, nc]))?)
            }
            Self::DeepONet(m) => {
                let x: Vec<T> = targets.iter().flat_map(|t| (0..k).flat_map(move |j| data.vector(t - k + j).iter().map(of))).collect();
                let b = g.constant(Tensor::new(&[n, nc * k], x)?);
                let coords: Vec<T> = data
                    .cells
                    .iter()
                    .flat_map(|(r, c)| [T::of((*r as f64 + 0.5) / MAP_SIZE as f64), T::of((*c as f64 + 0.5) / MAP_SIZE as f64)])
                    .collect();
                let tr = g.constant(Tensor::new(&[nc, 2], coords)?);
                m.forward(g, p, b, tr)
            }
        }
    }
}
