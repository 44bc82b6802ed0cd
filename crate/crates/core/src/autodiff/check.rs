use alloc::vec::Vec;

use rand_distr::{Distribution, Uniform};

use super::{init_seed, AutodiffError, Graph, Tensor, Var};

/// Magnitude below which gradient errors are measured in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// `(input, element)` where the largest relative error occurred.
    pub worst: (usize, usize),
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `1e-5 · max(1, |x|)`, for every element of every input.
///
/// Non-scalar outputs are reduced to `Σ out ⊙ r` with fixed random weights
/// `r`, so every output element contributes.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], tolerance: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, AutodiffError>,
{
    grad_check_subset(f, inputs, tolerance, usize::MAX)
}

/// As [`grad_check`], probing at most `max_per_input` evenly spaced
/// elements of each input.
pub fn grad_check_subset<F>(f: F, inputs: &[Tensor<f64>], tolerance: f64, max_per_input: usize) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var, AutodiffError>,
{
    let objective = |xs: &[Tensor<f64>]| -> Result<(Graph<f64>, Vec<Var>, Var), AutodiffError> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.param(t)).collect();
        let out = f(&mut g, &vars)?;
        let n = g.value(out).len();
        let mut rng = init_seed(0x6772_6164, 0);
        let dist = Uniform::new(0.5, 1.5).expect("valid range");
        let w: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let weighted = g.mul_const(out, w)?;
        let s = g.sum(weighted);
        Ok((g, vars, s))
    };

    let (mut g, vars, s) = objective(inputs)?;
    g.backward(s);
    let mut report = GradCheckReport { max_rel_err: 0.0, max_abs_err: 0.0, worst: (0, 0), checked: 0, tolerance };
    let mut xs = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let analytic: Vec<f64> = match g.grad(*v) {
            Some(a) => a.to_vec(),
            None => alloc::vec![0.0; inputs[k].len()],
        };
        let n = inputs[k].len();
        let stride = if max_per_input >= n { 1 } else { n.div_ceil(max_per_input.max(1)) };
        for j in (0..n).step_by(stride) {
            let x0 = inputs[k].data[j];
            let h = 1e-5 * x0.abs().max(1.0);
            xs[k].data[j] = x0 + h;
            let (gp, _, sp) = objective(&xs)?;
            xs[k].data[j] = x0 - h;
            let (gm, _, sm) = objective(&xs)?;
            xs[k].data[j] = x0;
            let numeric = (gp.value(sp)[0] - gm.value(sm)[0]) / (2.0 * h);
            let abs = (analytic[j] - numeric).abs();
            let rel = abs / analytic[j].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs);
            if !(rel <= report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = (k, j);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ConvSpec, ParamStore};

    fn random(dims: &[usize], stream: u64) -> Tensor<f64> {
        let mut p = ParamStore::<f64>::new(stream);
        let i = p.uniform("x", dims, 1);
        p.get(i).clone()
    }

    #[test]
    fn linear_layer() {
        let r = grad_check(|g, v| g.linear(v[0], v[1], Some(v[2])), &[random(&[3, 4], 1), random(&[5, 4], 2), random(&[5], 3)], 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn dilated_conv3d() {
        let spec = ConvSpec::same([3, 3, 3], [1, 2, 2]);
        let r = grad_check(|g, v| g.conv(v[0], v[1], Some(v[2]), spec), &[random(&[1, 2, 3, 6, 6], 1), random(&[2, 2, 3, 3, 3], 2), random(&[2], 3)], 1e-5)
            .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn group_norm_silu_gelu() {
        let r = grad_check(
            |g, v| {
                let y = g.group_norm(v[0], 2, v[1], v[2], 1e-5)?;
                let a = g.silu(y);
                let b = g.gelu(y);
                g.mul(a, b)
            },
            &[random(&[2, 4, 3, 3], 1), random(&[4], 2), random(&[4], 3)],
            1e-5,
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn remaining_primitives() {
        let r = grad_check(
            |g, v| {
                let s = g.sigmoid(v[0]);
                let t = g.tanh(v[1]);
                let q = g.div(s, v[2])?;
                let c = g.concat(&[q, t])?;
                let sl = g.slice(c, 1, 2)?;
                let d = g.dropout(sl, 0.3, true, 5)?;
                let e = g.gather(d, alloc::vec![0, 2, 2, 5], None)?;
                let m = g.mean(e);
                let x = g.scale(m, 3.0);
                let y = g.sub(t, sl)?;
                let z = g.add_scalar(y, 0.5);
                let zz = g.mul(z, z)?;
                let w = g.sum(zz);
                g.add(x, w)
            },
            &[random(&[2, 2, 2], 1), random(&[2, 2, 2], 2), Tensor::full(&[2, 2, 2], 1.5)],
            1e-6,
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
