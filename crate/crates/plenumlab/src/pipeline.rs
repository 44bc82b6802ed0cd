//! The pipeline stages behind each subcommand. Every stage writes its
//! artifact together with a sidecar from which [`rerun`] reproduces it.

use std::path::{Path, PathBuf};

use plenumlab_core::dataprep::{
    checkerboard_masks, make_inpaint_samples, split_sequential, synth_dataset, ForecastData, LevelNorm, MaskSet,
};
use plenumlab_core::geometry::{build_assembly_map, build_domain};
use plenumlab_core::meshstudy::{align_series, error_maps, ErrorMaps};
use plenumlab_core::models::{
    evaluate_inpaint, evaluate_one_step, train, ConvLstmNet, DeepONet, Forecaster, ForecasterKind, InpaintData, InpaintNet,
    LstmNet, TrainConfig, TrainOutcome,
};
use plenumlab_core::probes::{FlowDataset, LAYERS};
use plenumlab_core::solver::{run_transient, FlowProblem};

use crate::config::{Fidelity, RunConfig};
use crate::error::{Error, Result};
use crate::export::{self, MetricRows, ResidualLog};
use crate::gradsuite;
use crate::ptn;
use crate::sidecar::{read_dataset, write_dataset, CheckpointMeta, CurveRecord, Normalization, Sidecar, Task};

pub const SYNTH: &str = "synth";
pub const SIMULATE: &str = "simulate";
pub const MASK: &str = "mask";
pub const MESHSTUDY: &str = "meshstudy";
pub const TRAIN_INPAINT: &str = "train-inpaint";
pub const TRAIN_FORECAST: &str = "train-forecast";
pub const EVAL: &str = "eval";
pub const GRADCHECK: &str = "gradcheck";
pub const EXPORT: &str = "export";

/// `<path>` with `suffix` appended to the file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn one_input<'a>(inputs: &'a [PathBuf], what: &str) -> Result<&'a Path> {
    match inputs {
        [p] => Ok(p),
        _ => Err(Error::Usage(format!("{what} expects exactly one input, got {}", inputs.len()))),
    }
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<FlowDataset> {
    let mut ds = synth_dataset(cfg.synth.kind, cfg.synth.t_len, cfg.seed, &cfg.synth.params);
    ds.provenance = cfg.digest();
    write_dataset(&ds, out, Sidecar::new("PFD1", SYNTH, &[], cfg))?;
    Ok(ds)
}

/// Runs the solver at the configured fidelity, writing the recorded
/// dataset and a per-step residual CSV (`<out>.residuals.csv`). A run that
/// stops early still writes what it recorded before reporting the error.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<FlowDataset> {
    let domain = build_domain(&cfg.resolved_domain())?;
    let problem = FlowProblem::new(&domain, cfg.fluid, cfg.turbulence, cfg.porous, &cfg.swirl, cfg.solver.clone())?;
    let mut log = ResidualLog::create(&with_suffix(out, ".residuals.csv"))?;
    let mut log_err = None;
    let result = run_transient(&domain, &problem, &cfg.transient, &mut |report, _| {
        if log_err.is_none() {
            log_err = log.push(report).err();
        }
    });
    log.finish()?;
    if let Some(e) = log_err {
        return Err(e);
    }
    let (mut ds, err) = match result {
        Ok(run) => (run.dataset, None),
        Err(partial) => (partial.dataset, Some(partial.error)),
    };
    ds.fidelity = cfg.fidelity.label().to_string();
    ds.provenance = cfg.digest();
    write_dataset(&ds, out, Sidecar::new("PFD1", SIMULATE, &[], cfg))?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(ds),
    }
}

pub fn mask(cfg: &RunConfig, out: &Path) -> Result<MaskSet> {
    let geom = build_assembly_map(cfg.domain.pitch)?.valid;
    let masks = checkerboard_masks(&geom, cfg.mask.phase);
    export::mask_csv(&masks, out)?;
    Sidecar::new("CSV", MASK, &[], cfg).write(out)?;
    Ok(masks)
}

/// Writes `errors.csv`, `summary.csv` and one pixmap per layer of the
/// summarized map into `dir`.
fn write_comparison(maps: &ErrorMaps, geom: &plenumlab_core::geometry::Grid15<bool>, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    export::error_maps_csv(maps, geom, &dir.join("errors.csv"), &dir.join("summary.csv"))?;
    for l in 0..LAYERS {
        export::heatmap_ppm(&export::layer_grid(maps.summarized(), l), geom, &dir.join(format!("layer{l}.ppm")))?;
    }
    Ok(())
}

pub fn compare(cfg: &RunConfig, a: &FlowDataset, b: &FlowDataset, dir: &Path) -> Result<ErrorMaps> {
    let pairs = align_series(a, b)?;
    let maps = error_maps(a, b, &pairs, cfg.meshstudy.reference, cfg.meshstudy.mode)?;
    write_comparison(&maps, &a.geom_mask, dir)?;
    Ok(maps)
}

/// With two inputs, compares them. With none, runs the solver at the fine,
/// medium and coarse resolutions into `dir` and compares the fine run with
/// each coarser one (subdirectories `medium/` and `coarse/`).
pub fn meshstudy(cfg: &RunConfig, inputs: &[PathBuf], dir: &Path) -> Result<Vec<ErrorMaps>> {
    create_dir(dir)?;
    let maps = match inputs {
        [a, b] => vec![compare(cfg, &read_dataset(a)?, &read_dataset(b)?, dir)?],
        [] => {
            let mut runs = Vec::new();
            for fidelity in [Fidelity::Fine, Fidelity::Medium, Fidelity::Coarse] {
                let member = RunConfig { fidelity, ..cfg.clone() };
                runs.push(simulate(&member, &dir.join(format!("{}.pfd", fidelity.label())))?);
            }
            vec![compare(cfg, &runs[0], &runs[1], &dir.join("medium"))?, compare(cfg, &runs[0], &runs[2], &dir.join("coarse"))?]
        }
        _ => return Err(Error::Usage(format!("meshstudy expects two datasets or none, got {}", inputs.len()))),
    };
    Sidecar::new("CSV", MESHSTUDY, inputs, cfg).write(dir)?;
    Ok(maps)
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig { seed: cfg.seed, ..cfg.train }
}

/// Inpainting samples for all three splits; `norm` defaults to a fit on the
/// observed training cells.
pub fn inpaint_data(cfg: &RunConfig, ds: &FlowDataset, norm: Option<LevelNorm>) -> Result<InpaintData> {
    let masks = checkerboard_masks(&ds.geom_mask, cfg.mask.phase);
    let sp = split_sequential(ds.t_len, cfg.inpaint.splits)?;
    let levels = &cfg.inpaint.levels;
    let norm = match norm {
        Some(n) => n,
        None => LevelNorm::fit(ds, levels, &masks.obs, sp[0].clone())?,
    };
    let mk = |r: std::ops::Range<usize>| make_inpaint_samples(ds, levels, &masks, &norm, r, cfg.inpaint.coord_channels);
    let splits = [mk(sp[0].clone())?, mk(sp[1].clone())?, mk(sp[2].clone())?];
    Ok(InpaintData { splits, masks, norm })
}

fn checkpoint_meta<M>(task: Task, forecaster: Option<ForecasterKind>, n_params: usize, normalization: Normalization, out: &TrainOutcome<M>) -> CheckpointMeta {
    CheckpointMeta {
        task,
        forecaster,
        n_params,
        normalization,
        best_epoch: out.best_epoch,
        best_val: out.best_val,
        curves: CurveRecord::from(&out.curves),
        optimizer: out.optimizer,
        optimizer_steps: out.optimizer_steps,
        scheduler: out.scheduler,
        aborted: out.abort.as_ref().map(|e| e.to_string()),
    }
}

fn save_checkpoint(cfg: &RunConfig, command: &str, inputs: &[PathBuf], params: &plenumlab_core::autodiff::ParamStore<f32>, meta: CheckpointMeta, curves: &plenumlab_core::models::LossCurves, out: &Path) -> Result<()> {
    ptn::write(params, out)?;
    export::curves_csv(curves, &with_suffix(out, ".curves.csv"))?;
    let mut side = Sidecar::new("PTN1", command, inputs, cfg);
    side.checkpoint = Some(meta);
    side.write(out)
}

/// Trains the inpainting network and writes the best-validation checkpoint
/// plus its loss curves (`<out>.curves.csv`).
pub fn train_inpaint(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<TrainOutcome<InpaintNet<f32>>> {
    let ds = read_dataset(one_input(inputs, TRAIN_INPAINT)?)?;
    let data = inpaint_data(cfg, &ds, None)?;
    let net = InpaintNet::<f32>::new(cfg.inpaint.net, cfg.seed)?;
    let res = train(net, &data, &train_config(cfg))?;
    let meta = checkpoint_meta(Task::Inpaint, None, res.best.params.n_scalars(), Normalization::Level(data.norm.clone()), &res);
    save_checkpoint(cfg, TRAIN_INPAINT, inputs, &res.best.params, meta, &res.curves, out)?;
    match &res.abort {
        Some(e) => Err(e.clone().into()),
        None => Ok(res),
    }
}

pub fn build_forecaster(cfg: &RunConfig, n_cells: usize) -> Result<Forecaster<f32>> {
    let f = &cfg.forecast;
    Ok(match f.kind {
        ForecasterKind::Lstm => Forecaster::Lstm(LstmNet::new(f.lstm, n_cells, cfg.seed)),
        ForecasterKind::ConvLstm => Forecaster::ConvLstm(ConvLstmNet::new(f.convlstm, cfg.seed)),
        ForecasterKind::DeepONet => Forecaster::DeepONet(DeepONet::new(f.deeponet, n_cells, cfg.seed)?),
    })
}

/// Trains the configured forecaster on one layer.
pub fn train_forecast(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<TrainOutcome<Forecaster<f32>>> {
    let ds = read_dataset(one_input(inputs, TRAIN_FORECAST)?)?;
    let data = ForecastData::new(&ds, cfg.forecast.layer, cfg.forecast.splits)?;
    let model = build_forecaster(cfg, data.n_cells())?;
    let res = train(model, &data, &train_config(cfg))?;
    let meta = checkpoint_meta(Task::Forecast, Some(cfg.forecast.kind), res.best.params().n_scalars(), Normalization::MinMax(data.norm.clone()), &res);
    save_checkpoint(cfg, TRAIN_FORECAST, inputs, res.best.params(), meta, &res.curves, out)?;
    match &res.abort {
        Some(e) => Err(e.clone().into()),
        None => Ok(res),
    }
}

/// Scores a checkpoint on the test split of a dataset. The checkpoint's
/// own config fixes the architecture, masks and splits; `cfg` supplies the
/// evaluation window. Writes `metrics.csv` and per-layer MAPE heatmaps
/// into `dir`.
pub fn eval(cfg: &RunConfig, inputs: &[PathBuf], dir: &Path) -> Result<Vec<(String, Option<usize>, plenumlab_core::metrics::MetricReport)>> {
    let [ckpt, data_path] = inputs else {
        return Err(Error::Usage(format!("eval expects a checkpoint and a dataset, got {} inputs", inputs.len())));
    };
    let side = Sidecar::read(ckpt)?;
    let meta = side.checkpoint.ok_or_else(|| Error::Format(format!("{}: sidecar has no checkpoint section", ckpt.display())))?;
    let train_cfg = side.config;
    let entries = ptn::read(ckpt)?;
    let ds = read_dataset(data_path)?;
    create_dir(dir)?;
    let mut rows = Vec::new();
    match (meta.task, meta.normalization) {
        (Task::Inpaint, Normalization::Level(norm)) => {
            let data = inpaint_data(&train_cfg, &ds, Some(norm))?;
            let mut net = InpaintNet::<f32>::new(train_cfg.inpaint.net, train_cfg.seed)?;
            net.params.load(&entries)?;
            let ev = evaluate_inpaint(&net, &data, 2)?;
            for (k, rep) in ev.per_level.into_iter().enumerate() {
                let layer = train_cfg.inpaint.levels[k];
                if let Some(grid) = &rep.per_cell_mape {
                    export::heatmap_csv(grid, &data.masks.geom, &dir.join(format!("mape_layer{layer}.csv")))?;
                    export::heatmap_ppm(grid, &data.masks.geom, &dir.join(format!("mape_layer{layer}.ppm")))?;
                }
                rows.push(("test".to_string(), Some(layer), rep));
            }
            rows.push(("test".to_string(), None, ev.overall));
        }
        (Task::Forecast, Normalization::MinMax(norm)) => {
            let data = ForecastData::with_norm(&ds, train_cfg.forecast.layer, train_cfg.forecast.splits, norm)?;
            let mut model = build_forecaster(&train_cfg, data.n_cells())?;
            model.params_mut().load(&entries)?;
            let ev = evaluate_one_step(&model, &data, cfg.forecast.eval_window)?;
            if let Some(clip) = ev.clip {
                eprintln!("warning: evaluation window clipped from {} to {} steps", clip.requested, clip.used);
            }
            let layer = train_cfg.forecast.layer;
            if let Some(grid) = &ev.report.per_cell_mape {
                export::heatmap_csv(grid, &data.geom, &dir.join(format!("mape_layer{layer}.csv")))?;
                export::heatmap_ppm(grid, &data.geom, &dir.join(format!("mape_layer{layer}.ppm")))?;
            }
            rows.push(("test".to_string(), Some(layer), ev.report));
        }
        _ => return Err(Error::Format(format!("{}: normalization does not match the task", ckpt.display()))),
    }
    let view: Vec<MetricRows> = rows.iter().map(|(s, l, r)| MetricRows { scope: s, layer: *l, report: r }).collect();
    export::metrics_csv(&view, &dir.join("metrics.csv"))?;
    Sidecar::new("CSV", EVAL, inputs, cfg).write(dir)?;
    Ok(rows)
}

/// Runs the grad-check suite and writes one CSV row per case; fails when
/// any case exceeds the tolerance.
pub fn gradcheck(cfg: &RunConfig, out: &Path) -> Result<Vec<(&'static str, plenumlab_core::autodiff::GradCheckReport)>> {
    let cases = gradsuite::run(cfg.seed)?;
    let mut body = String::from("case,max_rel_err,max_abs_err,checked,tolerance,passed\n");
    for (name, r) in &cases {
        body.push_str(&format!("{name},{},{},{},{},{}\n", r.max_rel_err, r.max_abs_err, r.checked, r.tolerance, r.passed()));
    }
    export::text(out, &body)?;
    Sidecar::new("CSV", GRADCHECK, &[], cfg).write(out)?;
    let failed: Vec<&str> = cases.iter().filter(|(_, r)| !r.passed()).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        return Err(Error::Verification(format!("gradient check failed for {}", failed.join(", "))));
    }
    Ok(cases)
}

/// Dataset as CSV rows `t, layer, row, col, mdot`.
pub fn export_csv(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let ds = read_dataset(one_input(inputs, EXPORT)?)?;
    export::dataset_csv(&ds, out)?;
    Sidecar::new("CSV", EXPORT, inputs, cfg).write(out)
}

/// Runs `command` with an explicit config and inputs.
pub fn dispatch(command: &str, cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<()> {
    let no_inputs = |name: &str| {
        if inputs.is_empty() {
            Ok(())
        } else {
            Err(Error::Usage(format!("{name} takes no inputs")))
        }
    };
    match command {
        SYNTH => no_inputs(SYNTH).and_then(|_| synth(cfg, out).map(drop)),
        SIMULATE => no_inputs(SIMULATE).and_then(|_| simulate(cfg, out).map(drop)),
        MASK => no_inputs(MASK).and_then(|_| mask(cfg, out).map(drop)),
        GRADCHECK => no_inputs(GRADCHECK).and_then(|_| gradcheck(cfg, out).map(drop)),
        MESHSTUDY => meshstudy(cfg, inputs, out).map(drop),
        TRAIN_INPAINT => train_inpaint(cfg, inputs, out).map(drop),
        TRAIN_FORECAST => train_forecast(cfg, inputs, out).map(drop),
        EVAL => eval(cfg, inputs, out).map(drop),
        EXPORT => export_csv(cfg, inputs, out),
        other => Err(Error::Usage(format!("unknown command {other:?}"))),
    }
}

/// Re-runs the stage recorded in a sidecar, writing to `out`.
pub fn rerun(sidecar: &Path, out: &Path) -> Result<()> {
    let side = Sidecar::read(sidecar)?;
    let inputs: Vec<PathBuf> = side.inputs.iter().map(PathBuf::from).collect();
    dispatch(&side.command, &side.config, &inputs, out)
}
