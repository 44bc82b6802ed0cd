//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use plenumlab::config::{Fidelity, RunConfig};
use plenumlab::{gradsuite, pipeline};
use plenumlab_core::dataprep::{
    checkerboard_masks, make_inpaint_samples, split_sequential, synth_dataset, ForecastData, LevelNorm, SynthConfig, SynthKind,
    PLANE,
};
use plenumlab_core::geometry::{build_domain, AssemblyMap, DomainConfig, Layout, SideBoundary, MAP_SIZE};
use plenumlab_core::meshstudy::{align_series, error_maps, ErrorMaps, ErrorMode, Reference};
use plenumlab_core::models::{
    evaluate_inpaint, evaluate_one_step, masked_mse, train, ConvLstmConfig, ConvLstmNet, DeepONet, DeepONetConfig, Forecaster,
    InpaintConfig, InpaintData, InpaintNet, LstmConfig, LstmNet, TrainConfig,
};
use plenumlab_core::autodiff::{Graph, Tensor};
use plenumlab_core::probes::{FlowDataset, LAYERS, SNAPSHOT_LEN};
use plenumlab_core::solver::{
    advance_timestep, forchheimer_resistance, run_transient, velocity_gradient_invariants, FlowDirection, FlowMesh, FlowProblem,
    FlowState, FluidProps, PorousCoeffs, SolverSettings, SwirlSettings, TransientConfig, TurbConstants, TurbulenceMode,
};

type Outcome = (bool, String);

fn vessel(n: usize, nz: usize) -> plenumlab_core::geometry::Domain {
    build_domain(&DomainConfig { nx: n, ny: n, nz, ..DomainConfig::default() }).unwrap()
}

fn vessel_problem(domain: &plenumlab_core::geometry::Domain, alpha: f64, settings: SolverSettings, c: TurbConstants) -> FlowProblem {
    let swirl = SwirlSettings { alpha_s: vec![alpha], ..SwirlSettings::default() };
    FlowProblem::new(domain, FluidProps::default(), c, PorousCoeffs::default(), &swirl, settings).unwrap()
}

fn swirl_boundary() -> Outcome {
    let domain = vessel(48, 96);
    let mesh = FlowMesh::new(&domain);
    let (mut worst, mut faces, mut axial_only) = (0.0f64, 0usize, true);
    for alpha in [0.0, 0.3, 0.5] {
        let problem = vessel_problem(&domain, alpha, SolverSettings::default(), TurbConstants::default());
        let inlet = &problem.inlet;
        for (f, face) in mesh.inlet_faces.iter().enumerate() {
            let patch = &domain.inlets[face.patch];
            let bc = &inlet.patches[face.patch];
            let rel: Vec<f64> = (0..3).map(|a| face.center[a] - patch.center[a]).collect();
            let x: f64 = (0..3).map(|a| rel[a] * patch.e1[a]).sum();
            let y: f64 = (0..3).map(|a| rel[a] * patch.e2[a]).sum();
            let r = (x * x + y * y).sqrt();
            let v = inlet.velocity[f];
            let n = patch.inward.unit();
            let axial: f64 = (0..3).map(|a| v[a] * n[a]).sum();
            let t: Vec<f64> = (0..3).map(|a| v[a] - axial * n[a]).collect();
            let tangential = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            worst = worst.max((tangential / axial - alpha * r / (r * r + bc.eps_reg).sqrt()).abs());
            if alpha == 0.0 && tangential != 0.0 {
                axial_only = false;
            }
            faces += 1;
        }
    }
    (worst < 1e-9 && axial_only && faces > 0, format!("max ratio error {worst:.2e} over {faces} faces (tol 1e-9); zero swirl purely axial: {axial_only}"))
}

fn forchheimer_column() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for v in [0.5, 1.0, 2.0] {
        let config = DomainConfig { layout: Layout::OpenBox, nx: 1, ny: 1, nz: 34, core_height: 2.0, sides: SideBoundary::Symmetry, ..DomainConfig::default() };
        let domain = build_domain(&config).unwrap();
        let swirl = SwirlSettings { alpha_s: vec![0.0], u_axial: Some(v), ..SwirlSettings::default() };
        let settings = SolverSettings { dt: 0.01, ..SolverSettings::default() };
        let problem = FlowProblem::new(&domain, FluidProps::default(), TurbConstants::default(), PorousCoeffs::default(), &swirl, settings).unwrap();
        let mut state = problem.initial_state();
        let mut work = problem.workspace();
        for _ in 0..60 {
            advance_timestep(&mut state, &problem, &mut work).unwrap();
        }
        let n = state.p.len();
        let (a, b) = (4, n - 5);
        let dpdl = (state.p[a] - state.p[b]) / ((b - a) as f64 * domain.dz);
        let hand = (5949.0 * v.abs() + 2428.0) * v;
        let rel = (dpdl - hand).abs() / hand;
        worst = worst.max(rel);
        detail.push(format!("v={v}: {dpdl:.1} vs {hand:.1} Pa/m"));
        assert_eq!(forchheimer_resistance(v, FlowDirection::Axial, &PorousCoeffs::default()), hand);
    }
    (worst < 5e-3, format!("{}; max rel error {worst:.2e} (tol 5e-3)", detail.join(", ")))
}

fn conservation() -> Outcome {
    let domain = vessel(48, 96);
    let settings = SolverSettings::default();
    let dt = settings.dt;
    let problem = vessel_problem(&domain, 0.3, settings, TurbConstants::default());
    let window = TransientConfig { t_end: 500.0 * dt, record_start: 499.0 * dt, record_end: 500.0 * dt };
    let mut worst = 0.0f64;
    let mut steps = 0usize;
    let run = run_transient(&domain, &problem, &window, &mut |r, _| {
        worst = worst.max(r.global_imbalance());
        steps += 1;
    });
    let run = match run {
        Ok(r) => r,
        Err(p) => return (false, format!("solver stopped: {}", p.error)),
    };
    let inflow = problem.inlet.total_mass_flux();
    let last = run.dataset.t_len - 1;
    let layer1 = run.dataset.layer_sum(last, 0);
    let rel = (layer1 - inflow).abs() / inflow;
    (
        steps == 500 && worst < 1e-3 && rel < 1e-2,
        format!("{steps} steps, max per-step imbalance {:.2e}% (tol 0.1%), plane-1 sum {layer1:.1} vs inflow {inflow:.1} kg/s ({:.3}%, tol 1%)", 100.0 * worst, 100.0 * rel),
    )
}

fn turbulence_equivalence() -> Outcome {
    let domain = vessel(32, 40);
    let c = TurbConstants { c_eps3: 0.0, ..TurbConstants::default() };
    let run = |mode| {
        let problem = vessel_problem(&domain, 0.5, SolverSettings { turbulence: mode, ..SolverSettings::default() }, c);
        let mut state = problem.initial_state();
        let mut work = problem.workspace();
        for _ in 0..4 {
            advance_timestep(&mut state, &problem, &mut work).unwrap();
        }
        state
    };
    let bits = |s: &FlowState| {
        let mut v: Vec<u64> = Vec::new();
        for f in [&s.u[0], &s.u[1], &s.u[2], &s.p, &s.k, &s.eps, &s.nu_t] {
            v.extend(f.iter().map(|x| x.to_bits()));
        }
        v
    };
    let identical = bits(&run(TurbulenceMode::StructEpsilon)) == bits(&run(TurbulenceMode::KEpsilon));

    let domain = build_domain(&DomainConfig { layout: Layout::OpenBox, nx: 6, ny: 5, nz: 7, ..DomainConfig::default() }).unwrap();
    let mesh = FlowMesh::new(&domain);
    let n = mesh.len();
    let centers: Vec<[f64; 3]> = mesh.cells.iter().map(|&i| { let (a, b, c) = domain.ijk(i); domain.center(a, b, c) }).collect();
    let ones = vec![1.0; n];
    let field = |f: &dyn Fn([f64; 3]) -> [f64; 3]| {
        let mut u = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (p, x) in centers.iter().enumerate() {
            let v = f(*x);
            for c in 0..3 {
                u[c][p] = v[c];
            }
        }
        u
    };
    let (w, s) = (2.5, 1.3);
    let rot = velocity_gradient_invariants(&mesh, &field(&|x| [-w * x[1], w * x[0], 0.0]), &ones, &ones, 1e-12);
    let strain = velocity_gradient_invariants(&mesh, &field(&|x| [s * x[0], -s * x[1], 0.0]), &ones, &ones, 1e-12);
    let uniform = velocity_gradient_invariants(&mesh, &field(&|_| [1.0, -2.0, 3.0]), &ones, &ones, 1e-12);
    let e_rot = rot.q.iter().map(|q| (q - w * w).abs() / (w * w)).fold(0.0, f64::max);
    let e_strain = strain.q.iter().map(|q| (q + s * s).abs() / (s * s)).fold(0.0, f64::max);
    let zero = uniform.q.iter().all(|q| *q == 0.0);
    (
        identical && e_rot < 1e-12 && e_strain < 1e-12 && zero,
        format!("C_eps3=0 bit-identical: {identical}; Q rel errors rotation {e_rot:.1e}, strain {e_strain:.1e}; uniform Q exactly 0: {zero}"),
    )
}

fn autodiff() -> Outcome {
    match gradsuite::run(0) {
        Err(e) => (false, format!("suite failed to run: {e}")),
        Ok(cases) => {
            let worst = cases.iter().map(|(_, r)| r.max_rel_err).fold(0.0, f64::max);
            let failed: Vec<&str> = cases.iter().filter(|(_, r)| !r.passed()).map(|(n, _)| *n).collect();
            let names: Vec<&str> = cases.iter().map(|(n, _)| *n).collect();
            (failed.is_empty(), format!("{} cases ({}), worst rel error {worst:.2e} (tol 1e-5); failed: {failed:?}", cases.len(), names.join(", ")))
        }
    }
}

fn inpainting_contracts() -> Outcome {
    let ds = synth_dataset(SynthKind::Noise, 1000, 11, &SynthConfig::default());
    let masks = checkerboard_masks(&ds.geom_mask, 0);
    let levels = [0, 1, 2, 3];
    let norm = LevelNorm::fit(&ds, &levels, &masks.obs, 0..1000).unwrap();
    let samples = make_inpaint_samples(&ds, &levels, &masks, &norm, 0..1000, false).unwrap();
    let net = InpaintNet::<f32>::new(InpaintConfig { channels: 4, blocks: 1, groups: 2, ..InpaintConfig::default() }, 5).unwrap();
    let mut mismatches = 0usize;
    for s in &samples {
        let pred = net.predict(s).unwrap();
        let mut g = Graph::new();
        let p = net.params.bind(&mut g);
        let x = g.constant(Tensor::new(&s.input_dims(), s.input.clone()).unwrap());
        let y = net.predict_graph(&mut g, &p, x, s.miss.clone(), false, 0).unwrap();
        let graph = g.value(y);
        for i in 0..s.miss.len() {
            let (r, c) = ((i % PLANE) / MAP_SIZE, i % MAP_SIZE);
            if masks.obs[r][c] && (pred[i].to_bits() != s.input[i].to_bits() || graph[i].to_bits() != s.input[i].to_bits()) {
                mismatches += 1;
            }
        }
    }

    let mut x = 0x5eedu64;
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut loss_changes = 0usize;
    for _ in 0..200 {
        let n = PLANE;
        let pred: Vec<f64> = (0..n).map(|_| next()).collect();
        let target: Vec<f64> = (0..n).map(|_| next()).collect();
        let miss: Vec<f64> = (0..n).map(|i| masks.miss[i / MAP_SIZE][i % MAP_SIZE] as u8 as f64).collect();
        let loss = |p: &[f64], t: &[f64]| {
            let mut g = Graph::<f64>::new();
            let pv = g.constant(Tensor::new(&[n], p.to_vec()).unwrap());
            let tv = g.constant(Tensor::new(&[n], t.to_vec()).unwrap());
            let l = masked_mse(&mut g, pv, tv, miss.clone()).unwrap();
            g.value(l)[0]
        };
        let base = loss(&pred, &target);
        let (mut p2, mut t2) = (pred.clone(), target.clone());
        for i in 0..n {
            if miss[i] == 0.0 {
                p2[i] += 10.0 * next();
                t2[i] -= 10.0 * next();
            }
        }
        if loss(&p2, &t2).to_bits() != base.to_bits() {
            loss_changes += 1;
        }
    }

    let sp = split_sequential(10_000, [0.45, 0.10, 0.45]).unwrap();
    let lens = [sp[0].len(), sp[1].len(), sp[2].len()];
    let geom = AssemblyMap::standard().valid;
    let hidden = checkerboard_masks(&geom, 0).hidden_count();
    let frac = hidden as f64 / 193.0;
    (
        mismatches == 0 && loss_changes == 0 && lens == [4500, 1000, 4500] && (frac - 0.5).abs() < 0.01,
        format!(
            "copy-through mismatches {mismatches} over 1000 samples (both paths); masked-loss changes {loss_changes}/200; split {lens:?}; hidden {hidden}/193 = {:.2}%",
            100.0 * frac
        ),
    )
}

fn drift(t_len: usize) -> FlowDataset {
    synth_dataset(SynthKind::Drift, t_len, 7, &SynthConfig::default())
}

fn inpainting_trend() -> Outcome {
    let ds = drift(2000);
    let masks = checkerboard_masks(&ds.geom_mask, 0);
    let levels = [0, 1, 2, 3];
    let sp = split_sequential(ds.t_len, [0.45, 0.10, 0.45]).unwrap();
    let norm = LevelNorm::fit(&ds, &levels, &masks.obs, sp[0].clone()).unwrap();
    let mk = |r: std::ops::Range<usize>| make_inpaint_samples(&ds, &levels, &masks, &norm, r, false).unwrap();
    let data = InpaintData { splits: [mk(sp[0].clone()), mk(sp[1].clone()), mk(sp[2].clone())], masks, norm };
    let net = InpaintNet::<f32>::new(InpaintConfig { channels: 16, blocks: 3, groups: 4, ..InpaintConfig::default() }, 1).unwrap();
    let out = train(net, &data, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let ev = evaluate_inpaint(&out.best, &data, 2).unwrap();
    let mape: Vec<f64> = ev.per_level.iter().map(|r| r.mape).collect();
    let r2: Vec<f64> = ev.per_level.iter().map(|r| r.r2).collect();
    let pass = mape[0] > mape[3] && r2[1..].iter().all(|r| *r > r2[0]);
    let fmt = |v: &[f64], d: usize| v.iter().map(|x| format!("{x:.d$}")).collect::<Vec<_>>().join("/");
    (pass, format!("synthetic drift T=2000, 3 epochs; planes 1-4 MAPE {}%, R2 {}", fmt(&mape, 2), fmt(&r2, 3)))
}

fn forecasting_trend() -> Outcome {
    let ds = drift(2000);
    let data = ForecastData::new(&ds, 0, [0.6, 0.2, 0.2]).unwrap();
    let nc = data.n_cells();
    let tc = TrainConfig { epochs: 100, ..TrainConfig::default() };
    let models = [
        ("LSTM", Forecaster::Lstm(LstmNet::new(LstmConfig::default(), nc, 1))),
        ("ConvLSTM", Forecaster::ConvLstm(ConvLstmNet::new(ConvLstmConfig { hidden: 16, ..ConvLstmConfig::default() }, 1))),
        ("DeepONet", Forecaster::DeepONet(DeepONet::new(DeepONetConfig::default(), nc, 1).unwrap())),
    ];
    let mut r2 = Vec::new();
    for (name, m) in models {
        let out = train(m, &data, &tc).unwrap();
        let ev = evaluate_one_step(&out.best, &data, data.t_len).unwrap();
        r2.push((name, ev.report.r2));
    }
    let conv = r2[1].1;
    (
        conv > r2[0].1 && conv > r2[2].1,
        format!("100 epochs AdamW, base-layer R2: {}", r2.iter().map(|(n, r)| format!("{n} {r:.4}")).collect::<Vec<_>>().join(", ")),
    )
}

fn biased_pair(t_len: usize, bias: impl Fn(usize, usize, usize) -> f64, scale: &[f64]) -> (FlowDataset, FlowDataset) {
    let a = drift(t_len);
    let mut b = FlowDataset::empty(a.geom_mask, a.t0, a.dt_record);
    for t in 0..t_len {
        let mut snap = vec![0.0; SNAPSHOT_LEN];
        for l in 0..LAYERS {
            for r in 0..MAP_SIZE {
                for c in 0..MAP_SIZE {
                    snap[(l * MAP_SIZE + r) * MAP_SIZE + c] = a.get(t, l, r, c) as f64 * (1.0 + bias(l, r, c) * scale[t]);
                }
            }
        }
        b.push(&snap).unwrap();
    }
    (a, b)
}

fn mesh_study() -> Outcome {
    let geom = AssemblyMap::standard().valid;
    let beta = |l: usize, r: usize, c: usize| {
        let m = 0.01 * (1 + (7 * r + 3 * c + l) % 9) as f64;
        if (r + c) % 2 == 0 { m } else { -m }
    };
    let scale = [1.0, -0.5, 0.25];
    let (a, b) = biased_pair(3, beta, &scale);
    let pairs = align_series(&a, &b).unwrap();
    let maps = error_maps(&a, &b, &pairs, Reference::A, ErrorMode::Max).unwrap();
    let mean_scale = scale.iter().sum::<f64>() / 3.0;
    let mut worst = 0.0f64;
    for l in 0..LAYERS {
        for r in 0..MAP_SIZE {
            for c in 0..MAP_SIZE {
                if geom[r][c] {
                    worst = worst.max((ErrorMaps::at(&maps.max_pct, l, r, c) - 100.0 * beta(l, r, c)).abs());
                    worst = worst.max((ErrorMaps::at(&maps.timeavg_pct, l, r, c) - 100.0 * beta(l, r, c) * mean_scale).abs());
                }
            }
        }
    }
    let (a, b) = biased_pair(2, |_, r, c| if (r + c) % 2 == 0 { 0.05 } else { -0.05 }, &[1.0, 1.0]);
    let pm = error_maps(&a, &b, &align_series(&a, &b).unwrap(), Reference::A, ErrorMode::Timeavg).unwrap();
    let abs_err = pm.abs_layer_avg.iter().map(|v| (v - 5.0).abs()).fold(0.0, f64::max);
    let signed = pm.signed_layer_avg()[0];

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    let dt = cfg.solver.dt;
    cfg.transient = TransientConfig { t_end: 20.0 * dt, record_start: 10.0 * dt, record_end: 20.0 * dt };
    let triplet = match pipeline::meshstudy(&cfg, &[], dir.path()) {
        Ok(m) => m,
        Err(e) => return (false, format!("injected max/timeavg error {worst:.1e} pp; solver triplet failed: {e}")),
    };
    let summaries_ok = ["medium", "coarse"].iter().all(|s| dir.path().join(s).join("summary.csv").is_file());
    let finite = triplet.iter().all(|m| m.abs_layer_avg.iter().all(|v| v.is_finite()));
    let fmt = |m: &ErrorMaps| m.abs_layer_avg.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join("/");
    (
        worst < 1e-4 && abs_err < 1e-4 && summaries_ok && finite,
        format!(
            "injected max/timeavg error {worst:.1e} pp (tol 1e-4); +-5% abs_layer_avg within {abs_err:.1e} of 5 (signed {signed:.2}); solver triplet abs_layer_avg % medium {} coarse {}",
            fmt(&triplet[0]),
            fmt(&triplet[1])
        ),
    )
}

fn artifacts(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in walk(dir) {
        if e.is_file() {
            out.push(e.strip_prefix(dir).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let (first, second) = (root.path().join("a"), root.path().join("b"));
    std::fs::create_dir_all(&first).unwrap();
    std::fs::create_dir_all(&second).unwrap();
    let set = |pairs: &[&str]| RunConfig::load(None, &pairs.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap();
    let base = ["seed=3", "synth.t_len=40", "train.epochs=2", "train.batch_size=8"];
    let cfg = set(&base);
    let data = first.join("s.pfd");
    let small_sim = set(&["domain.nz=20", "transient.t_end=0.01", "transient.record_start=0.004", "transient.record_end=0.01"]);
    let coarse_sim = RunConfig { fidelity: Fidelity::Coarse, ..small_sim.clone() };
    let inpaint = set(&[&base[..], &["inpaint.net.channels=4", "inpaint.net.blocks=1", "inpaint.net.groups=2"]].concat());
    let forecast = |kind: &str| {
        set(&[
            &base[..],
            &[kind, "forecast.lstm.hidden=8", "forecast.lstm.head_hidden=8", "forecast.convlstm.hidden=4", "forecast.deeponet.hidden=[8,8]", "forecast.deeponet.branch_latent=4", "forecast.deeponet.trunk_latent=4"],
        ]
        .concat())
    };
    let f = |n: &str| first.join(n);
    let steps: Vec<(&str, RunConfig, Vec<PathBuf>, PathBuf)> = vec![
        (pipeline::SYNTH, cfg.clone(), vec![], f("s.pfd")),
        (pipeline::SYNTH, set(&["seed=4", "synth.t_len=40"]), vec![], f("s4.pfd")),
        (pipeline::SIMULATE, small_sim.clone(), vec![], f("fine.pfd")),
        (pipeline::SIMULATE, coarse_sim, vec![], f("coarse.pfd")),
        (pipeline::MASK, cfg.clone(), vec![], f("mask.csv")),
        (pipeline::EXPORT, cfg.clone(), vec![data.clone()], f("s.csv")),
        (pipeline::MESHSTUDY, cfg.clone(), vec![data.clone(), f("s4.pfd")], f("ms")),
        (pipeline::MESHSTUDY, small_sim, vec![f("fine.pfd"), f("coarse.pfd")], f("ms_solver")),
        (pipeline::TRAIN_INPAINT, inpaint, vec![data.clone()], f("inpaint.ptn")),
        (pipeline::TRAIN_FORECAST, forecast("forecast.kind=\"lstm\""), vec![data.clone()], f("lstm.ptn")),
        (pipeline::TRAIN_FORECAST, forecast("forecast.kind=\"convlstm\""), vec![data.clone()], f("convlstm.ptn")),
        (pipeline::TRAIN_FORECAST, forecast("forecast.kind=\"deeponet\""), vec![data.clone()], f("deeponet.ptn")),
        (pipeline::EVAL, cfg.clone(), vec![f("inpaint.ptn"), data.clone()], f("eval_inpaint")),
        (pipeline::EVAL, cfg.clone(), vec![f("convlstm.ptn"), data.clone()], f("eval_convlstm")),
        (pipeline::GRADCHECK, cfg.clone(), vec![], f("gradcheck.csv")),
    ];
    for (cmd, cfg, inputs, out) in &steps {
        if let Err(e) = pipeline::dispatch(cmd, cfg, inputs, out) {
            return (false, format!("{cmd} failed: {e}"));
        }
    }
    let mut stages = Vec::new();
    for (cmd, _, _, out) in &steps {
        let side = plenumlab::sidecar::sidecar_path(out);
        let target = second.join(out.file_name().unwrap());
        if let Err(e) = pipeline::rerun(&side, &target) {
            return (false, format!("rerun of {cmd} failed: {e}"));
        }
        stages.push(*cmd);
    }
    let (a, b) = (artifacts(&first), artifacts(&second));
    if a != b {
        return (false, format!("artifact sets differ: {} vs {} files", a.len(), b.len()));
    }
    let differing: Vec<String> =
        a.iter().filter(|p| std::fs::read(first.join(p)).unwrap() != std::fs::read(second.join(p)).unwrap()).map(|p| p.display().to_string()).collect();
    stages.dedup();
    (
        differing.is_empty(),
        format!("{} stages ({}) re-run from sidecars, {} artifact files compared, differing: {differing:?}", steps.len(), stages.join(", "), a.len()),
    )
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let criteria = [
        Criterion { id: 1, name: "swirl boundary", limit: Some(Duration::from_secs(1)), run: swirl_boundary },
        Criterion { id: 2, name: "Forchheimer column", limit: mins(1), run: forchheimer_column },
        Criterion { id: 3, name: "conservation", limit: mins(10), run: conservation },
        Criterion { id: 4, name: "turbulence equivalence", limit: None, run: turbulence_equivalence },
        Criterion { id: 5, name: "autodiff", limit: mins(2), run: autodiff },
        Criterion { id: 6, name: "inpainting contracts", limit: None, run: inpainting_contracts },
        Criterion { id: 7, name: "reconstruction trend", limit: mins(60), run: inpainting_trend },
        Criterion { id: 8, name: "forecasting trend", limit: mins(60), run: forecasting_trend },
        Criterion { id: 9, name: "mesh study", limit: None, run: mesh_study },
        Criterion { id: 10, name: "determinism", limit: None, run: determinism },
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed < l);
        let limit = c.limit.map(|l| format!(" (limit {} s)", l.as_secs())).unwrap_or_default();
        let pass = ok && in_time;
        failures += !pass as usize;
        println!("criterion {:>2} {} {}: {detail}; {:.1} s{limit}", c.id, if pass { "PASS" } else { "FAIL" }, c.name, elapsed.as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
