use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{masked_mse, Forecaster, InpaintData, InpaintNet, ModelError};
use crate::autodiff::{init_seed, AdamW, Graph, OptimState, ParamStore, PlateauScheduler, Tensor, Var};
use crate::dataprep::{ForecastData, PLANE};
use crate::geometry::{Grid15, MAP_SIZE};
use crate::metrics::{compute_metrics, per_cell_mape, BoxStats, MetricReport};
use crate::probes::LAYERS;

/// A network the training loop can fit: examples are numbered per split
/// and losses are built for batches of them.
pub trait Model: Clone {
    type Data;
    fn params(&self) -> &ParamStore<f32>;
    fn params_mut(&mut self) -> &mut ParamStore<f32>;
    /// Number of examples in split 0 (train), 1 (validation) or 2 (test).
    fn split_len(&self, data: &Self::Data, split: usize) -> usize;
    fn loss(&self, g: &mut Graph<f32>, p: &[Var], data: &Self::Data, split: usize, batch: &[usize], training: bool, seed: u64) -> Result<Var, ModelError>;
}

impl Model for InpaintNet<f32> {
    type Data = InpaintData;

    fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore<f32> {
        &mut self.params
    }

    fn split_len(&self, data: &InpaintData, split: usize) -> usize {
        data.splits[split].len()
    }

    fn loss(&self, g: &mut Graph<f32>, p: &[Var], data: &InpaintData, split: usize, batch: &[usize], training: bool, seed: u64) -> Result<Var, ModelError> {
        let (x, y, m) = data.batch::<f32>(split, batch)?;
        let x = g.constant(x);
        let y = g.constant(y);
        let pred = self.predict_graph(g, p, x, m.clone(), training, seed)?;
        masked_mse(g, pred, y, m)
    }
}

impl Model for Forecaster<f32> {
    type Data = ForecastData;

    fn params(&self) -> &ParamStore<f32> {
        Forecaster::params(self)
    }

    fn params_mut(&mut self) -> &mut ParamStore<f32> {
        Forecaster::params_mut(self)
    }

    fn split_len(&self, data: &ForecastData, split: usize) -> usize {
        data.targets(split, self.lookback()).len()
    }

    fn loss(&self, g: &mut Graph<f32>, p: &[Var], data: &ForecastData, split: usize, batch: &[usize], _training: bool, _seed: u64) -> Result<Var, ModelError> {
        let start = data.targets(split, self.lookback()).start;
        let targets: Vec<usize> = batch.iter().map(|i| start + i).collect();
        let pred = self.forward(g, p, data, &targets)?;
        let nc = data.n_cells();
        let y: Vec<f32> = targets.iter().flat_map(|t| data.vector(*t).iter().copied()).collect();
        let y = g.constant(Tensor::new(&[targets.len(), nc], y)?);
        Ok(g.mse(pred, y)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, lr: 1e-3, weight_decay: 0.01, plateau_factor: 0.5, plateau_patience: 5, min_lr: 1e-5, seed: 0 }
    }
}

/// Per-epoch mean losses and the learning rate each epoch ran with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub lr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<M> {
    /// Parameters of the epoch with the lowest validation loss.
    pub best: M,
    /// 1-based epoch of `best`; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val: Option<f64>,
    pub curves: LossCurves,
    /// Set when training stopped on a non-finite loss; `best` then holds
    /// the last finite checkpoint.
    pub abort: Option<ModelError>,
    /// Optimizer and scheduler as they stood when training stopped.
    pub optimizer: AdamW,
    pub scheduler: PlateauScheduler,
    pub optimizer_steps: u64,
}

/// AdamW on shuffled minibatches with a plateau scheduler on the
/// validation loss, keeping the best-validation checkpoint.
pub fn train<M: Model>(model: M, data: &M::Data, cfg: &TrainConfig) -> Result<TrainOutcome<M>, ModelError> {
    let n_train = model.split_len(data, 0);
    let n_val = model.split_len(data, 1);
    if n_train == 0 {
        return Err(ModelError::EmptySplit("train"));
    }
    if n_val == 0 {
        return Err(ModelError::EmptySplit("validation"));
    }
    let bs = cfg.batch_size.max(1);
    let mut opt = AdamW { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamW::default() };
    let mut sched = PlateauScheduler::new(cfg.lr, cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    let mut state = OptimState::for_params(model.params());
    let mut model = model;
    let mut out = TrainOutcome {
        best: model.clone(),
        best_epoch: 0,
        best_val: None,
        curves: LossCurves::default(),
        abort: None,
        optimizer: opt,
        scheduler: sched,
        optimizer_steps: 0,
    };
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = init_seed(cfg.seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(bs).enumerate() {
            let mut g = Graph::new();
            let p = model.params().bind(&mut g);
            let dropout_seed = cfg.seed ^ ((epoch as u64) << 40) ^ ((b as u64) << 8);
            let loss = model.loss(&mut g, &p, data, 0, batch, true, dropout_seed)?;
            let l = g.value(loss)[0] as f64;
            if !l.is_finite() {
                out.abort = Some(ModelError::NonFiniteLoss { epoch });
                return Ok(finish(out, opt, sched, &state));
            }
            total += l * batch.len() as f64;
            g.backward(loss);
            let grads = model.params().grads(&g, &p);
            let grads: Vec<Option<Vec<f32>>> = grads.into_iter().map(|o| o.map(<[f32]>::to_vec)).collect();
            let refs: Vec<Option<&[f32]>> = grads.iter().map(|o| o.as_deref()).collect();
            opt.step(model.params_mut(), &refs, &mut state)?;
        }
        let val = split_loss(&model, data, 1, bs)?;
        out.curves.train.push(total / n_train as f64);
        out.curves.val.push(val);
        out.curves.lr.push(opt.lr);
        if !val.is_finite() {
            out.abort = Some(ModelError::NonFiniteLoss { epoch });
            return Ok(finish(out, opt, sched, &state));
        }
        if out.best_val.is_none_or(|b| val < b) {
            out.best = model.clone();
            out.best_epoch = epoch;
            out.best_val = Some(val);
        }
        opt.lr = sched.observe(val);
    }
    Ok(finish(out, opt, sched, &state))
}

fn finish<M>(mut out: TrainOutcome<M>, opt: AdamW, sched: PlateauScheduler, state: &OptimState<f32>) -> TrainOutcome<M> {
    out.optimizer = opt;
    out.scheduler = sched;
    out.optimizer_steps = state.step;
    out
}

/// Example-weighted mean loss over a split without dropout.
pub fn split_loss<M: Model>(model: &M, data: &M::Data, split: usize, batch_size: usize) -> Result<f64, ModelError> {
    let n = model.split_len(data, split);
    let idx: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for batch in idx.chunks(batch_size.max(1)) {
        let mut g = Graph::new();
        let p = model.params().bind(&mut g);
        let loss = model.loss(&mut g, &p, data, split, batch, false, 0)?;
        total += g.value(loss)[0] as f64 * batch.len() as f64;
    }
    Ok(total / n.max(1) as f64)
}

/// A requested evaluation window longer than the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowClip {
    pub requested: usize,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastEval {
    pub report: MetricReport,
    /// Target steps evaluated.
    pub steps: core::ops::Range<usize>,
    /// De-normalized predictions and truth, `[step][cell]` in kg/s.
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    pub clip: Option<WindowClip>,
}

/// Teacher-forced one-step predictions over the last `window` steps of
/// the test split, de-normalized before scoring.
pub fn evaluate_one_step(model: &Forecaster<f32>, data: &ForecastData, window: usize) -> Result<ForecastEval, ModelError> {
    let all = data.targets(2, model.lookback());
    if all.is_empty() {
        return Err(ModelError::EmptySplit("test"));
    }
    let used = window.min(all.len());
    let clip = (used < window).then_some(WindowClip { requested: window, used });
    let steps = all.end - used..all.end;
    let nc = data.n_cells();
    let mut pred = Vec::with_capacity(used * nc);
    let targets: Vec<usize> = steps.clone().collect();
    for chunk in targets.chunks(64) {
        let mut g = Graph::new();
        let p = model.params().bind(&mut g);
        let y = model.forward(&mut g, &p, data, chunk)?;
        pred.extend(g.value(y).iter().enumerate().map(|(i, v)| data.norm.invert(i % nc, *v as f64)));
    }
    let truth: Vec<f64> = steps.clone().flat_map(|t| data.raw[t * nc..(t + 1) * nc].iter().copied()).collect();
    let mut report = compute_metrics(&pred, &truth, &vec![true; pred.len()]).map_err(|_| ModelError::EmptyMask)?;
    let grid = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; used * PLANE];
        for (i, x) in v.iter().enumerate() {
            let (r, c) = data.cells[i % nc];
            out[(i / nc) * PLANE + r * MAP_SIZE + c] = *x;
        }
        out
    };
    let cell_mape = per_cell_mape(&grid(&pred), &grid(&truth), &data.geom);
    let mut boxes = vec![None; LAYERS];
    boxes[data.layer] = BoxStats::of(&cell_mape.iter().flatten().copied().filter(|v| !v.is_nan()).collect::<Vec<_>>());
    report.per_cell_mape = Some(cell_mape);
    report.per_layer_boxstats = Some(boxes);
    Ok(ForecastEval { report, steps, pred, truth, clip })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintEval {
    /// Hidden-cell metrics per reconstructed level, in kg/s.
    pub per_level: Vec<MetricReport>,
    pub overall: MetricReport,
}

/// Reconstruction metrics over the hidden cells of a split, de-normalized
/// per level.
pub fn evaluate_inpaint(net: &InpaintNet<f32>, data: &InpaintData, split: usize) -> Result<InpaintEval, ModelError> {
    let samples = &data.splits[split];
    let first = samples.first().ok_or(ModelError::EmptySplit("evaluation"))?;
    let nl = first.levels;
    let (mut pred, mut truth) = (vec![Vec::new(); nl], vec![Vec::new(); nl]);
    let mut miss = [[false; MAP_SIZE]; MAP_SIZE];
    for (r, row) in miss.iter_mut().enumerate() {
        for (c, m) in row.iter_mut().enumerate() {
            *m = data.masks.miss[r][c];
        }
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    for chunk in idx.chunks(32) {
        let (x, _, m) = data.batch::<f32>(split, chunk)?;
        let mut g = Graph::new();
        let p = net.params.bind(&mut g);
        let xv = g.constant(x);
        let y = net.predict_graph(&mut g, &p, xv, m, false, 0)?;
        let vals = g.value(y);
        for (j, &si) in chunk.iter().enumerate() {
            let s = &samples[si];
            for k in 0..nl {
                for i in 0..PLANE {
                    let at = k * PLANE + i;
                    pred[k].push(data.norm.invert(k, vals[j * nl * PLANE + at] as f64));
                    truth[k].push(data.norm.invert(k, s.target[at] as f64));
                }
            }
        }
    }
    let mask: Vec<bool> = (0..samples.len()).flat_map(|_| (0..PLANE).map(|i| miss[i / MAP_SIZE][i % MAP_SIZE])).collect();
    let mut per_level = Vec::with_capacity(nl);
    for k in 0..nl {
        let mut rep = compute_metrics(&pred[k], &truth[k], &mask).map_err(|_| ModelError::EmptyMask)?;
        rep.per_cell_mape = Some(per_cell_mape(&pred[k], &truth[k], &miss as &Grid15<bool>));
        per_level.push(rep);
    }
    let all_p: Vec<f64> = pred.concat();
    let all_t: Vec<f64> = truth.concat();
    let all_m: Vec<bool> = (0..nl).flat_map(|_| mask.iter().copied()).collect();
    let overall = compute_metrics(&all_p, &all_t, &all_m).map_err(|_| ModelError::EmptyMask)?;
    Ok(InpaintEval { per_level, overall })
}
