//! Finite-difference verification of the autodiff primitives and networks
//! in 64-bit mode.

use plenumlab_core::autodiff::{grad_check, grad_check_subset, AutodiffError, ConvSpec, GradCheckReport, ParamStore, Tensor};
use plenumlab_core::models::{convlstm_cell_step, InpaintConfig, InpaintNet, ModelError};

/// Relative-error threshold every case must beat.
pub const TOLERANCE: f64 = 1e-5;

fn random(dims: &[usize], stream: u64, seed: u64) -> Tensor<f64> {
    let mut p = ParamStore::<f64>::new(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let i = p.uniform("x", dims, 1);
    p.get(i).clone()
}

fn model_err(e: ModelError) -> AutodiffError {
    match e {
        ModelError::Autodiff(a) => a,
        _ => AutodiffError::ShapeMismatch("network rejected its inputs"),
    }
}

/// Runs every case; the seed varies the random inputs.
pub fn run(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>, AutodiffError> {
    let r = |dims: &[usize], s: u64| random(dims, s, seed);
    let mut out = Vec::new();

    out.push((
        "dense",
        grad_check(
            |g, v| {
                let h = g.linear(v[0], v[1], Some(v[2]))?;
                let h = g.tanh(h);
                g.linear(h, v[3], Some(v[4]))
            },
            &[r(&[3, 4], 1), r(&[5, 4], 2), r(&[5], 3), r(&[2, 5], 4), r(&[2], 5)],
            TOLERANCE,
        )?,
    ));

    out.push((
        "conv2d",
        grad_check(
            |g, v| g.conv(v[0], v[1], Some(v[2]), ConvSpec::same([1, 3, 3], [1, 1, 1])),
            &[r(&[2, 2, 5, 5], 6), r(&[3, 2, 3, 3], 7), r(&[3], 8)],
            TOLERANCE,
        )?,
    ));

    out.push((
        "conv3d_dilated_1_2_2",
        grad_check(
            |g, v| g.conv(v[0], v[1], Some(v[2]), ConvSpec::same([3, 3, 3], [1, 2, 2])),
            &[r(&[1, 2, 3, 6, 6], 9), r(&[2, 2, 3, 3, 3], 10), r(&[2], 11)],
            TOLERANCE,
        )?,
    ));

    out.push((
        "group_norm",
        grad_check(|g, v| g.group_norm(v[0], 2, v[1], v[2], 1e-5), &[r(&[2, 4, 3, 3], 12), r(&[4], 13), r(&[4], 14)], TOLERANCE)?,
    ));

    out.push((
        "silu_gelu",
        grad_check(
            |g, v| {
                let a = g.silu(v[0]);
                let b = g.gelu(v[0]);
                g.add(a, b)
            },
            &[r(&[4, 6], 15)],
            TOLERANCE,
        )?,
    ));

    let (hidden, k) = (3, 3);
    let mut cell_inputs = vec![r(&[4 * hidden, 2 + hidden, k, k], 16), r(&[4 * hidden], 17)];
    for s in 0..3 {
        cell_inputs.push(r(&[1, 2, 5, 5], 18 + s));
    }
    out.push((
        "convlstm_cell_3_steps",
        grad_check(
            |g, v| {
                let zeros = g.constant(Tensor::zeros(&[1, hidden, 5, 5]));
                let (mut h, mut c) = (zeros, zeros);
                for &x in &v[2..5] {
                    (h, c) = convlstm_cell_step(g, x, h, c, v[0], v[1])?;
                }
                g.add(h, c)
            },
            &cell_inputs,
            TOLERANCE,
        )?,
    ));

    let net = InpaintNet::<f64>::new(InpaintConfig { channels: 4, blocks: 2, groups: 2, ..InpaintConfig::default() }, seed).map_err(model_err)?;
    let np = net.params.len();
    let mut inputs: Vec<Tensor<f64>> = net.params.iter().map(|(_, t)| t.clone()).collect();
    for (i, t) in inputs.iter_mut().enumerate() {
        let noise = r(&t.dims, 100 + i as u64);
        for (a, b) in t.data.iter_mut().zip(&noise.data) {
            *a += 0.1 * b;
        }
    }
    inputs.push(r(&[1, 3, 2, 6, 6], 99));
    let miss: Vec<f64> = (0..2 * 36).map(|i| ((i / 6 + i % 6) % 2) as f64).collect();
    out.push((
        "inpaint_net_toy",
        grad_check_subset(
            |g, v| net.predict_graph(g, &v[..np], v[np], miss.clone(), true, seed ^ 17).map_err(model_err),
            &inputs,
            TOLERANCE,
            64,
        )?,
    ));
    Ok(out)
}
