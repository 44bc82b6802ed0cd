//! Linear solvers for seven-point systems on the flow-cell numbering:
//! `diag[p] x[p] - sum_d off[p][d] x[nbr[p][d]] = rhs[p]`.
//!
//! Every `nbr` entry must be a valid cell index; a missing neighbor is
//! encoded by pointing at the cell itself with a zero coefficient (see
//! [`FlowMesh::stencil`](super::FlowMesh::stencil)).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::multigrid::Multigrid;

#[derive(Debug, Clone, Default)]
pub struct StencilSystem {
    pub diag: Vec<f64>,
    pub off: Vec<[f64; 6]>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Residual norm before the solve, scaled as described by each solver.
    pub initial_residual: f64,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    /// Modified incomplete Cholesky with zero fill.
    Mic0,
    /// One aggregation-multigrid V-cycle.
    Multigrid,
}

impl StencilSystem {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![[0.0; 6]; n], rhs: vec![0.0; n] }
    }

    pub fn reset(&mut self) {
        self.diag.iter_mut().for_each(|v| *v = 0.0);
        self.off.iter_mut().for_each(|v| *v = [0.0; 6]);
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn row_product(&self, nbr: &[[u32; 6]], x: &[f64], p: usize) -> f64 {
        self.diag[p] * x[p] - neighbor_sum(&self.off[p], &nbr[p], x, 0)
    }

    /// L1 norm of `rhs - A x`.
    pub fn residual_l1(&self, nbr: &[[u32; 6]], x: &[f64]) -> f64 {
        (0..x.len()).map(|p| (self.rhs[p] - self.row_product(nbr, x, p)).abs()).sum()
    }

    pub fn apply(&self, nbr: &[[u32; 6]], x: &[f64], y: &mut [f64]) {
        for (p, yp) in y.iter_mut().enumerate() {
            *yp = self.row_product(nbr, x, p);
        }
    }

    /// Gauss–Seidel sweeps in cell order until the summed update falls below
    /// `tol` times the summed magnitude of `x`. Residuals are L1 norms scaled
    /// by `sum |diag x|`.
    pub fn gauss_seidel(&self, nbr: &[[u32; 6]], x: &mut [f64], tol: f64, max_sweeps: usize) -> SolveStats {
        let scale = |x: &[f64]| -> f64 { (0..x.len()).map(|p| (self.diag[p] * x[p]).abs()).sum::<f64>() };
        let initial = self.residual_l1(nbr, x);
        let norm0 = scale(x).max(self.rhs.iter().map(|v| v.abs()).sum());
        let mut stats = SolveStats {
            iterations: 0,
            initial_residual: if norm0 > 0.0 { initial / norm0 } else { initial },
            final_residual: 0.0,
        };
        if initial == 0.0 {
            return stats;
        }
        for sweep in 1..=max_sweeps {
            let mut change = 0.0;
            let mut size = 0.0;
            for p in 0..x.len() {
                let new = (self.rhs[p] + neighbor_sum(&self.off[p], &nbr[p], x, 0)) / self.diag[p];
                change += (new - x[p]).abs();
                size += new.abs();
                x[p] = new;
            }
            stats.iterations = sweep;
            if change <= tol * size {
                break;
            }
        }
        let norm = scale(x).max(self.rhs.iter().map(|v| v.abs()).sum());
        let fin = self.residual_l1(nbr, x);
        stats.final_residual = if norm > 0.0 { fin / norm } else { fin };
        stats
    }
}

/// Gauss–Seidel on `K` systems sharing the off-diagonal coefficients,
/// swept together until every one meets the [`StencilSystem::gauss_seidel`]
/// stopping rule.
pub fn gauss_seidel_shared<const K: usize>(
    off: &[[f64; 6]],
    nbr: &[[u32; 6]],
    diag: [&[f64]; K],
    rhs: [&[f64]; K],
    x: [&mut [f64]; K],
    tol: f64,
    max_sweeps: usize,
) -> [SolveStats; K] {
    let n = off.len();
    let scaled_residual = |k: usize, x: &[f64]| -> f64 {
        let mut res = 0.0;
        let mut norm_x = 0.0;
        let mut norm_b = 0.0;
        for p in 0..n {
            res += (rhs[k][p] - (diag[k][p] * x[p] - neighbor_sum(&off[p], &nbr[p], x, 0))).abs();
            norm_x += (diag[k][p] * x[p]).abs();
            norm_b += rhs[k][p].abs();
        }
        let norm = norm_x.max(norm_b);
        if norm > 0.0 {
            res / norm
        } else {
            res
        }
    };
    let mut stats = [SolveStats::default(); K];
    let mut active = [false; K];
    for k in 0..K {
        stats[k].initial_residual = scaled_residual(k, x[k]);
        active[k] = stats[k].initial_residual != 0.0;
    }
    let mut sweep = 0;
    while sweep < max_sweeps && active.iter().any(|a| *a) {
        sweep += 1;
        let mut change = [0.0; K];
        let mut size = [0.0; K];
        for p in 0..n {
            let o = &off[p];
            let q = &nbr[p];
            for k in 0..K {
                if !active[k] {
                    continue;
                }
                let xk = &mut *x[k];
                let new = (rhs[k][p] + neighbor_sum(o, q, xk, 0)) / diag[k][p];
                change[k] += (new - xk[p]).abs();
                size[k] += new.abs();
                xk[p] = new;
            }
        }
        for k in 0..K {
            if active[k] {
                stats[k].iterations = sweep;
                if change[k] <= tol * size[k] {
                    active[k] = false;
                }
            }
        }
    }
    for k in 0..K {
        stats[k].final_residual = scaled_residual(k, x[k]);
    }
    stats
}

/// `sum_d off[d] x[nbr[d]]`, summed so that direction `last` (the neighbor
/// updated just before in a Gauss–Seidel sweep) enters at the end. Keeps the
/// sweep's serial dependency chain short.
#[inline(always)]
pub(crate) fn neighbor_sum(off: &[f64; 6], nbr: &[u32; 6], x: &[f64], last: usize) -> f64 {
    let t = |d: usize| off[d] * x[nbr[d] as usize];
    let (a, b) = if last == 0 { (0, 1) } else { (1, 0) };
    ((t(b) + t(2)) + (t(3) + t(4))) + t(5) + t(a)
}

/// Dot product with four interleaved partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

struct Mic0 {
    precon: Vec<f64>,
}

impl Mic0 {
    const TAU: f64 = 0.97;
    const SIGMA: f64 = 0.25;

    /// Lower neighbors are the minus directions (0, 2, 4); cells are numbered
    /// so that they always precede `p`.
    fn new(sys: &StencilSystem, nbr: &[[u32; 6]]) -> Self {
        let n = sys.diag.len();
        let mut precon = vec![0.0; n];
        for p in 0..n {
            let mut e = sys.diag[p];
            for lower in [0usize, 2, 4] {
                let q = nbr[p][lower] as usize;
                if q == p {
                    continue;
                }
                let a = sys.off[p][lower];
                let pq = precon[q];
                e -= (a * pq) * (a * pq);
                let mut others = 0.0;
                for upper in [1usize, 3, 5] {
                    if upper != lower + 1 {
                        others += sys.off[q][upper];
                    }
                }
                e -= Self::TAU * a * others * pq * pq;
            }
            if e < Self::SIGMA * sys.diag[p] {
                e = sys.diag[p];
            }
            precon[p] = if e > 0.0 { 1.0 / libm::sqrt(e) } else { 0.0 };
        }
        Self { precon }
    }

    fn apply(&self, sys: &StencilSystem, nbr: &[[u32; 6]], r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let q = z;
        for p in 0..n {
            let mut t = r[p];
            for lower in [0usize, 2, 4] {
                let m = nbr[p][lower] as usize;
                if m != p {
                    t += sys.off[p][lower] * self.precon[m] * q[m];
                }
            }
            q[p] = t * self.precon[p];
        }
        for p in (0..n).rev() {
            let mut t = q[p];
            for upper in [1usize, 3, 5] {
                let m = nbr[p][upper] as usize;
                if m != p {
                    t += sys.off[p][upper] * self.precon[p] * q[m];
                }
            }
            q[p] = t * self.precon[p];
        }
    }
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite stencil system. Stops when `||r|| <= tol ||b||` in the
/// Euclidean norm; residuals in the returned stats use the same scaling.
/// `coords` are integer grid coordinates of the cells, needed by
/// [`Preconditioner::Multigrid`]; without them that choice falls back to
/// [`Preconditioner::Mic0`].
pub fn pcg(
    sys: &StencilSystem,
    nbr: &[[u32; 6]],
    coords: Option<&[[u32; 3]]>,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    kind: Preconditioner,
) -> SolveStats {
    match (kind, coords) {
        (Preconditioner::Jacobi, _) => pcg_with(sys, nbr, x, tol, max_iter, &mut |r, z| {
            for p in 0..r.len() {
                z[p] = if sys.diag[p] != 0.0 { r[p] / sys.diag[p] } else { r[p] };
            }
        }),
        (Preconditioner::Multigrid, Some(coords)) => {
            let mut mg = Multigrid::new(sys, nbr, coords);
            pcg_with(sys, nbr, x, tol, max_iter, &mut |r, z| mg.apply(r, z))
        }
        (Preconditioner::Mic0 | Preconditioner::Multigrid, _) => {
            let mic = Mic0::new(sys, nbr);
            pcg_with(sys, nbr, x, tol, max_iter, &mut |r, z| mic.apply(sys, nbr, r, z))
        }
    }
}

/// [`pcg`] with a caller-supplied symmetric preconditioner `z = M⁻¹ r`.
pub fn pcg_with(
    sys: &StencilSystem,
    nbr: &[[u32; 6]],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    precondition: &mut dyn FnMut(&[f64], &mut [f64]),
) -> SolveStats {
    let n = x.len();
    let mut r = vec![0.0; n];
    for p in 0..n {
        r[p] = sys.rhs[p] - sys.row_product(nbr, x, p);
    }
    let b_norm = libm::sqrt(dot(&sys.rhs, &sys.rhs));
    let r0 = libm::sqrt(dot(&r, &r));
    let mut stats = SolveStats {
        iterations: 0,
        initial_residual: if b_norm > 0.0 { r0 / b_norm } else { r0 },
        final_residual: 0.0,
    };
    if r0 == 0.0 || b_norm == 0.0 {
        stats.final_residual = stats.initial_residual;
        return stats;
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let target = tol * b_norm;
    let mut res = r0;
    for it in 1..=max_iter {
        sys.apply(nbr, &d, &mut q);
        let dq = dot(&d, &q);
        if dq <= 0.0 {
            break;
        }
        let alpha = rz / dq;
        for p in 0..n {
            x[p] += alpha * d[p];
            r[p] -= alpha * q[p];
        }
        res = libm::sqrt(dot(&r, &r));
        stats.iterations = it;
        if res <= target {
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in 0..n {
            d[p] = z[p] + beta * d[p];
        }
    }
    stats.final_residual = res / b_norm;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Poisson chain with Dirichlet ends folded into the diagonal.
    fn chain(n: usize) -> (StencilSystem, Vec<[u32; 6]>) {
        let mut sys = StencilSystem::zeros(n);
        let mut nbr: Vec<[u32; 6]> = (0..n).map(|p| [p as u32; 6]).collect();
        for p in 0..n {
            sys.diag[p] = 2.0;
            if p > 0 {
                nbr[p][4] = (p - 1) as u32;
                sys.off[p][4] = 1.0;
            }
            if p + 1 < n {
                nbr[p][5] = (p + 1) as u32;
                sys.off[p][5] = 1.0;
            }
            sys.rhs[p] = 1.0;
        }
        (sys, nbr)
    }

    fn exact(n: usize) -> Vec<f64> {
        // -x'' = 1 with x(0) = x(n+1) = 0 on unit spacing: x_i = i (n + 1 - i) / 2.
        (1..=n).map(|i| (i * (n + 1 - i)) as f64 / 2.0).collect()
    }

    #[test]
    fn pcg_solves_chain_with_both_preconditioners() {
        for kind in [Preconditioner::Jacobi, Preconditioner::Mic0] {
            let (sys, nbr) = chain(50);
            let mut x = vec![0.0; 50];
            let stats = pcg(&sys, &nbr, None, &mut x, 1e-12, 500, kind);
            assert!(stats.final_residual <= 1e-12, "{kind:?}: {stats:?}");
            for (a, b) in x.iter().zip(exact(50)) {
                assert!((a - b).abs() < 1e-8 * b.max(1.0));
            }
        }
    }

    #[test]
    fn mic0_is_exact_on_a_chain() {
        // On a tridiagonal matrix incomplete Cholesky has no dropped fill.
        let (sys, nbr) = chain(30);
        let mut x = vec![0.0; 30];
        let stats = pcg(&sys, &nbr, None, &mut x, 1e-12, 10, Preconditioner::Mic0);
        assert!(stats.iterations <= 2, "{stats:?}");
    }

    #[test]
    fn gauss_seidel_converges_on_dominant_system() {
        let (mut sys, nbr) = chain(20);
        sys.diag.iter_mut().for_each(|d| *d = 4.0);
        let mut x = vec![0.0; 20];
        let stats = sys.gauss_seidel(&nbr, &mut x, 1e-14, 500);
        assert!(stats.final_residual < 1e-12);
    }

    #[test]
    fn zero_rhs_is_a_no_op() {
        let (mut sys, nbr) = chain(5);
        sys.rhs.iter_mut().for_each(|v| *v = 0.0);
        let mut x = vec![0.0; 5];
        let stats = pcg(&sys, &nbr, None, &mut x, 1e-6, 100, Preconditioner::Jacobi);
        assert_eq!(stats.iterations, 0);
        assert_eq!(sys.gauss_seidel(&nbr, &mut x, 1e-5, 10).iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
