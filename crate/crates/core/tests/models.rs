use plenumlab_core::autodiff::{grad_check, AutodiffError, grad_check_subset, Graph, ParamStore, Tensor, Var};
use plenumlab_core::dataprep::*;
use plenumlab_core::geometry::{AssemblyMap, MAP_SIZE};
use plenumlab_core::models::*;
use proptest::prelude::*;

fn random(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut p = ParamStore::<f64>::new(seed);
    let i = p.uniform("x", dims, 1);
    p.get(i).clone()
}

fn inpaint_data(t_len: usize, levels: &[usize]) -> InpaintData {
    let ds = synth_dataset(SynthKind::Drift, t_len, 5, &SynthConfig::default());
    let masks = checkerboard_masks(&ds.geom_mask, 0);
    let sp = split_sequential(t_len, [0.45, 0.10, 0.45]).unwrap();
    let norm = LevelNorm::fit(&ds, levels, &masks.obs, sp[0].clone()).unwrap();
    let mk = |r: std::ops::Range<usize>| make_inpaint_samples(&ds, levels, &masks, &norm, r, false).unwrap();
    InpaintData { splits: [mk(sp[0].clone()), mk(sp[1].clone()), mk(sp[2].clone())], masks, norm }
}

fn toy_inpaint() -> InpaintConfig {
    InpaintConfig { channels: 4, blocks: 2, groups: 2, ..InpaintConfig::default() }
}

#[test]
fn copy_through_is_bit_exact() {
    let data = inpaint_data(40, &[0, 1, 2, 3]);
    let net = InpaintNet::<f32>::new(toy_inpaint(), 3).unwrap();
    for s in data.splits.iter().flatten() {
        let pred = net.predict(s).unwrap();
        let vol = s.miss.len();
        for i in 0..vol {
            let (r, c) = ((i % PLANE) / MAP_SIZE, i % MAP_SIZE);
            if data.masks.obs[r][c] {
                assert_eq!(pred[i].to_bits(), s.input[i].to_bits());
            } else if !data.masks.geom[r][c] {
                assert_eq!(pred[i], 0.0);
            }
        }
    }
}

#[test]
fn zero_head_fills_hidden_cells_with_its_bias() {
    let data = inpaint_data(4, &[0, 1]);
    let mut net = InpaintNet::<f32>::new(toy_inpaint(), 3).unwrap();
    let n = net.params.len();
    net.params.get_mut(n - 2).data.fill(0.0);
    net.params.get_mut(n - 1).data[0] = 0.25;
    let s = &data.splits[0][0];
    let pred = net.predict(s).unwrap();
    for i in 0..s.miss.len() {
        if s.miss[i] == 1.0 {
            assert_eq!(pred[i], 0.25);
        }
    }
}

#[test]
fn empty_miss_mask_returns_the_observed_field() {
    let ds = synth_dataset(SynthKind::Blobs, 3, 2, &SynthConfig::default());
    let masks = MaskSet::new(ds.geom_mask, [[false; MAP_SIZE]; MAP_SIZE]).unwrap();
    let norm = LevelNorm::fit(&ds, &[0], &masks.obs, 0..3).unwrap();
    let s = make_inpaint_samples(&ds, &[0], &masks, &norm, 0..3, false).unwrap();
    let net = InpaintNet::<f32>::new(toy_inpaint(), 1).unwrap();
    for smp in &s {
        assert_eq!(net.predict(smp).unwrap(), smp.target);
    }
    let data = InpaintData { splits: [s.clone(), s.clone(), s], masks, norm };
    let mut g = Graph::new();
    let p = net.params.bind(&mut g);
    assert_eq!(net.loss(&mut g, &p, &data, 0, &[0, 1], false, 0), Err(ModelError::EmptyMask));
}

fn mse_of(pred: &[f64], target: &[f64], miss: &[f64]) -> Result<f64, ModelError> {
    let mut g = Graph::new();
    let p = g.constant(Tensor::new(&[pred.len()], pred.to_vec()).unwrap());
    let t = g.constant(Tensor::new(&[target.len()], target.to_vec()).unwrap());
    let l = masked_mse(&mut g, p, t, miss.to_vec())?;
    Ok(g.value(l)[0])
}

#[test]
fn masked_mse_examples() {
    assert_eq!(mse_of(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
    assert_eq!(mse_of(&[1.0, 5.0, 9.0], &[1.0, 2.0, 2.0], &[0.0, 1.0, 0.0]).unwrap(), 9.0);
    assert_eq!(mse_of(&[7.0, 2.0], &[1.0, 2.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_eq!(mse_of(&[1.0], &[2.0], &[0.0]), Err(ModelError::EmptyMask));
}

proptest! {
    #[test]
    fn masked_loss_ignores_observed_and_invalid_cells(
        vals in prop::collection::vec(-10.0f64..10.0, 16),
        noise in prop::collection::vec(-100.0f64..100.0, 16),
        hidden in prop::collection::vec(any::<bool>(), 16),
    ) {
        prop_assume!(hidden.iter().any(|h| *h));
        let miss: Vec<f64> = hidden.iter().map(|h| if *h { 1.0 } else { 0.0 }).collect();
        let target = vec![0.5; 16];
        let perturbed: Vec<f64> = (0..16).map(|i| if hidden[i] { vals[i] } else { vals[i] + noise[i] }).collect();
        prop_assert_eq!(mse_of(&vals, &target, &miss).unwrap(), mse_of(&perturbed, &target, &miss).unwrap());
    }
}

#[test]
fn convlstm_cell_with_zero_parameters() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(random(&[1, 2, 4, 4], 1));
    let h = g.constant(random(&[1, 3, 4, 4], 2));
    let c0 = random(&[1, 3, 4, 4], 3);
    let c = g.constant(c0.clone());
    let w = g.param(&Tensor::zeros(&[12, 5, 3, 3]));
    let b = g.param(&Tensor::zeros(&[12]));
    let (h2, c2) = convlstm_cell_step(&mut g, x, h, c, w, b).unwrap();
    for i in 0..c0.len() {
        let expect_c = 0.5 * c0.data[i];
        assert_eq!(g.value(c2)[i], expect_c);
        assert!((g.value(h2)[i] - 0.5 * expect_c.tanh()).abs() < 1e-15);
    }
    let z = g.constant(Tensor::zeros(&[1, 3, 4, 4]));
    let zx = g.constant(Tensor::zeros(&[1, 2, 4, 4]));
    let (h3, c3) = convlstm_cell_step(&mut g, zx, z, z, w, b).unwrap();
    assert!(g.value(h3).iter().chain(g.value(c3)).all(|v| *v == 0.0));
}

fn forecast_data(t_len: usize) -> ForecastData {
    let ds = synth_dataset(SynthKind::Drift, t_len, 3, &SynthConfig::default());
    ForecastData::new(&ds, 0, [0.6, 0.2, 0.2]).unwrap()
}

fn zeroed<T: plenumlab_core::autodiff::Real>(p: &mut ParamStore<T>) {
    for i in 0..p.len() {
        p.get_mut(i).data.fill(T::zero());
    }
}

#[test]
fn zero_lstm_and_deeponet_bias() {
    let data = forecast_data(20);
    let mut lstm = LstmNet::<f64>::new(LstmConfig { hidden: 8, head_hidden: 8, ..LstmConfig::default() }, 193, 1);
    zeroed(&mut lstm.params);
    let f = Forecaster::Lstm(lstm);
    let mut g = Graph::new();
    let p = f.params().bind(&mut g);
    let y = f.forward(&mut g, &p, &data, &[5, 6]).unwrap();
    assert!(g.value(y).iter().all(|v| *v == 0.0));

    let mut don = DeepONet::<f64>::new(DeepONetConfig { hidden: [8, 16], branch_latent: 8, trunk_latent: 8, lookback: 1 }, 193, 1).unwrap();
    // The branch output layer is zero, so every coordinate sees only the bias.
    don.params.get_mut(4).data.fill(0.0);
    don.params.get_mut(5).data.fill(0.0);
    don.params.get_mut(12).data[0] = 0.7;
    let f = Forecaster::DeepONet(don);
    let mut g = Graph::new();
    let p = f.params().bind(&mut g);
    let y = f.forward(&mut g, &p, &data, &[5]).unwrap();
    assert_eq!(g.dims(y), &[1, 193]);
    assert!(g.value(y).iter().all(|v| *v == 0.7));

    let bad = DeepONetConfig { branch_latent: 128, trunk_latent: 64, ..DeepONetConfig::default() };
    assert!(matches!(DeepONet::<f64>::new(bad, 193, 1), Err(ModelError::Autodiff(_))));
}

fn autodiff_err(e: ModelError) -> AutodiffError {
    match e {
        ModelError::Autodiff(a) => a,
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn gradcheck_convlstm_unrolled_three_steps() {
    let net = ConvLstmNet::<f64>::new(ConvLstmConfig { hidden: 3, layers: 2, kernel: 3, lookback: 3 }, 4);
    let np = net.params.len();
    let mut inputs: Vec<Tensor<f64>> = net.params.iter().map(|(_, t)| t.clone()).collect();
    for s in 0..3 {
        inputs.push(random(&[1, 2, 5, 5], 10 + s));
    }
    let r = grad_check(
        |g, v| {
            let seq = &v[np..];
            net.forward(g, &v[..np], seq)
                .map_err(autodiff_err)
        },
        &inputs,
        1e-5,
    )
    .unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn gradcheck_toy_inpaint_net() {
    let net = InpaintNet::<f64>::new(InpaintConfig { channels: 4, blocks: 3, groups: 2, ..InpaintConfig::default() }, 8).unwrap();
    let np = net.params.len();
    let mut inputs: Vec<Tensor<f64>> = net.params.iter().map(|(_, t)| t.clone()).collect();
    // Nonzero biases and affine terms so their gradients are exercised.
    for t in inputs.iter_mut() {
        let noise = random(&t.dims, t.len() as u64);
        for (a, b) in t.data.iter_mut().zip(&noise.data) {
            *a += 0.1 * b;
        }
    }
    inputs.push(random(&[1, 3, 2, 6, 6], 99));
    let miss: Vec<f64> = (0..2 * 36).map(|i| ((i / 6 + i % 6) % 2) as f64).collect();
    let r = grad_check_subset(
        |g, v| {
            net.predict_graph(g, &v[..np], v[np], miss.clone(), true, 17).map_err(autodiff_err)
        },
        &inputs,
        1e-5,
        64,
    )
    .unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn gradcheck_dense_forecasters() {
    let data = forecast_data(12);
    for f in [
        Forecaster::Lstm(LstmNet::<f64>::new(LstmConfig { hidden: 4, head_hidden: 5, layers: 2, lookback: 2 }, 193, 2)),
        Forecaster::DeepONet(DeepONet::<f64>::new(DeepONetConfig { hidden: [4, 6], branch_latent: 3, trunk_latent: 3, lookback: 1 }, 193, 2).unwrap()),
    ] {
        let inputs: Vec<Tensor<f64>> = f.params().iter().map(|(_, t)| t.clone()).collect();
        let r = grad_check_subset(
            |g, v| {
                f.forward(g, v, &data, &[4, 7]).map_err(autodiff_err)
            },
            &inputs,
            1e-5,
            40,
        )
        .unwrap();
        assert!(r.passed(), "{:?}: {r:?}", f.kind());
    }
}

fn rot_grid(v: &[f64], k: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for (plane_in, plane_out) in v.chunks(k * k).zip(out.chunks_mut(k * k)) {
        for r in 0..k {
            for c in 0..k {
                plane_out[c * k + (k - 1 - r)] = plane_in[r * k + c];
            }
        }
    }
    out
}

#[test]
fn convlstm_commutes_with_quarter_turns() {
    let net = ConvLstmNet::<f64>::new(ConvLstmConfig { hidden: 4, layers: 2, kernel: 3, lookback: 2 }, 6);
    let mut turned = net.clone();
    for i in 0..turned.params.len() {
        let t = turned.params.get_mut(i);
        if t.dims.len() == 4 {
            let k = t.dims[3];
            t.data = rot_grid(&t.data, k);
        }
    }
    let geom: Vec<f64> = AssemblyMap::standard().valid.iter().flatten().map(|v| if *v { 1.0 } else { 0.0 }).collect();
    let frames: Vec<Tensor<f64>> = (0..2)
        .map(|s| {
            let mut f = random(&[1, 1, 15, 15], 40 + s).data;
            f.iter_mut().zip(&geom).for_each(|(a, m)| *a *= m);
            f.extend_from_slice(&geom);
            Tensor::new(&[1, 2, 15, 15], f).unwrap()
        })
        .collect();
    let run = |net: &ConvLstmNet<f64>, frames: &[Tensor<f64>]| {
        let mut g = Graph::new();
        let p = net.params.bind(&mut g);
        let seq: Vec<Var> = frames.iter().map(|f| g.constant(f.clone())).collect();
        let y = net.forward(&mut g, &p, &seq).unwrap();
        g.value(y).to_vec()
    };
    let base = run(&net, &frames);
    let rotated: Vec<Tensor<f64>> = frames.iter().map(|f| Tensor::new(&f.dims, rot_grid(&f.data, 15)).unwrap()).collect();
    let out = run(&turned, &rotated);
    let expect = rot_grid(&base, 15);
    for (a, b) in out.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

fn small_convlstm() -> Forecaster<f32> {
    Forecaster::ConvLstm(ConvLstmNet::new(ConvLstmConfig { hidden: 4, ..ConvLstmConfig::default() }, 1))
}

#[test]
fn zero_epochs_return_the_initial_model() {
    let data = forecast_data(30);
    let m = small_convlstm();
    let out = train(m.clone(), &data, &TrainConfig { epochs: 0, ..TrainConfig::default() }).unwrap();
    assert_eq!(out.best, m);
    assert_eq!(out.best_epoch, 0);
    assert_eq!(out.curves, LossCurves::default());
}

#[test]
fn training_reduces_loss_deterministically() {
    let data = forecast_data(60);
    let cfg = TrainConfig { epochs: 20, batch_size: 8, seed: 4, ..TrainConfig::default() };
    let a = train(small_convlstm(), &data, &cfg).unwrap();
    assert!(a.curves.train.last().unwrap() < &a.curves.train[0]);
    let argmin = a.curves.val.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap().0 + 1;
    assert_eq!(a.best_epoch, argmin);
    let b = train(small_convlstm(), &data, &cfg).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.curves, b.curves);
}

#[test]
fn evaluation_window_is_clipped() {
    let data = forecast_data(50);
    let ev = evaluate_one_step(&small_convlstm(), &data, 5000).unwrap();
    assert_eq!(ev.clip, Some(WindowClip { requested: 5000, used: 10 }));
    assert_eq!(ev.steps, 40..50);
    assert_eq!(ev.report.n, 10 * 193);
    let ev = evaluate_one_step(&small_convlstm(), &data, 4).unwrap();
    assert_eq!((ev.clip, ev.steps), (None, 46..50));
    assert!(ev.report.per_cell_mape.is_some());
}
