//! Aggregation multigrid used as a symmetric preconditioner for the
//! pressure-correction solve.
//!
//! Aggregates are the connected pieces of 2×2×2 blocks of the cell grid, so
//! cells separated by a wall never share a coarse unknown. Coarse operators
//! are Galerkin products with piecewise-constant transfer. The cycle uses
//! a forward Gauss–Seidel pre-smoothing sweep and a backward post-smoothing
//! sweep, which keeps the cycle symmetric.

use alloc::vec;
use alloc::vec::Vec;

use super::linear::StencilSystem;
use super::mesh::NO_CELL;

/// Coarse-level matrix `diag[i] x[i] - sum_j val[j] x[col[j]]`.
#[derive(Debug, Clone, Default)]
struct Csr {
    diag: Vec<f64>,
    row: Vec<u32>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn sweep(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let n = self.len();
        for t in 0..n {
            let i = if forward { t } else { n - 1 - t };
            let mut acc = b[i];
            for j in self.row[i] as usize..self.row[i + 1] as usize {
                acc += self.val[j] * x[self.col[j] as usize];
            }
            if self.diag[i] > 0.0 {
                x[i] = acc / self.diag[i];
            }
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = b[i] - self.diag[i] * x[i];
            for j in self.row[i] as usize..self.row[i + 1] as usize {
                acc += self.val[j] * x[self.col[j] as usize];
            }
            r[i] = acc;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Coarse {
    matrix: Csr,
    /// Aggregate of each node of the next finer level.
    agg_of_fine: Vec<u32>,
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

/// Multigrid hierarchy for one fine-level stencil system.
#[derive(Debug, Clone, Default)]
pub struct Multigrid {
    levels: Vec<Coarse>,
    fine_nbr: Vec<[u32; 6]>,
    /// Fine-level couplings in single precision; the cycle only has to be a
    /// fixed symmetric operator, not an exact one.
    fine_off: Vec<[f32; 6]>,
    fine_diag: Vec<f64>,
    fine_inv_diag: Vec<f64>,
    fine_x: Vec<f64>,
    /// Weight of the coarse-grid correction.
    pub coarse_weight: f64,
    pub coarsest_sweeps: usize,
    /// Coarse-grid corrections per visit of a coarse level (1: V-cycle,
    /// 2: W-cycle).
    pub coarse_cycles: usize,
}

const MIN_COARSE: usize = 64;
const MAX_LEVELS: usize = 12;

/// Groups nodes into connected components of their `coords / 2` blocks.
fn aggregate(coords: &[[u32; 3]], for_each_neighbor: &dyn Fn(usize, &mut dyn FnMut(usize))) -> (Vec<u32>, Vec<[u32; 3]>) {
    let n = coords.len();
    let mut agg = vec![NO_CELL; n];
    let mut coarse_coords = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if agg[start] != NO_CELL {
            continue;
        }
        let id = coarse_coords.len() as u32;
        let block = [coords[start][0] / 2, coords[start][1] / 2, coords[start][2] / 2];
        coarse_coords.push(block);
        agg[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for_each_neighbor(p, &mut |q| {
                if agg[q] == NO_CELL && [coords[q][0] / 2, coords[q][1] / 2, coords[q][2] / 2] == block {
                    agg[q] = id;
                    stack.push(q);
                }
            });
        }
    }
    (agg, coarse_coords)
}

/// Galerkin coarse matrix from fine rows given as `(diag, [(neighbor, coupling)])`.
fn galerkin(
    n_fine: usize,
    agg: &[u32],
    n_coarse: usize,
    fine_diag: &dyn Fn(usize) -> f64,
    fine_row: &dyn Fn(usize, &mut dyn FnMut(usize, f64)),
) -> Csr {
    let mut members_ptr = vec![0u32; n_coarse + 1];
    for &a in agg {
        members_ptr[a as usize + 1] += 1;
    }
    for i in 0..n_coarse {
        members_ptr[i + 1] += members_ptr[i];
    }
    let mut fill = members_ptr.clone();
    let mut members = vec![0u32; n_fine];
    for (p, &a) in agg.iter().enumerate() {
        members[fill[a as usize] as usize] = p as u32;
        fill[a as usize] += 1;
    }
    let mut m = Csr { diag: vec![0.0; n_coarse], row: Vec::with_capacity(n_coarse + 1), col: Vec::new(), val: Vec::new() };
    let mut slot = vec![u32::MAX; n_coarse];
    m.row.push(0);
    for i in 0..n_coarse {
        let row_start = m.col.len();
        let mut diag = 0.0;
        for &p in &members[members_ptr[i] as usize..members_ptr[i + 1] as usize] {
            let p = p as usize;
            diag += fine_diag(p);
            fine_row(p, &mut |q, a| {
                let j = agg[q] as usize;
                if j == i {
                    diag -= a;
                } else if slot[j] == u32::MAX {
                    slot[j] = m.col.len() as u32;
                    m.col.push(j as u32);
                    m.val.push(a);
                } else {
                    m.val[slot[j] as usize] += a;
                }
            });
        }
        for &j in &m.col[row_start..] {
            slot[j as usize] = u32::MAX;
        }
        m.diag[i] = diag;
        m.row.push(m.col.len() as u32);
    }
    m
}

impl Multigrid {
    /// Builds the hierarchy for `sys`, whose cells sit at integer grid
    /// coordinates `coords`.
    pub fn new(sys: &StencilSystem, nbr: &[[u32; 6]], coords: &[[u32; 3]]) -> Self {
        let n = sys.diag.len();
        let mut levels: Vec<Coarse> = Vec::new();
        let fine_neighbors = |p: usize, f: &mut dyn FnMut(usize)| {
            for (d, &q) in nbr[p].iter().enumerate() {
                if q as usize != p && sys.off[p][d] != 0.0 {
                    f(q as usize);
                }
            }
        };
        let (agg, mut cc) = aggregate(coords, &fine_neighbors);
        let nc = cc.len();
        if n > MIN_COARSE && nc < n {
            let matrix = galerkin(n, &agg, nc, &|p| sys.diag[p], &|p, f| {
                for (d, &q) in nbr[p].iter().enumerate() {
                    if q as usize != p {
                        f(q as usize, sys.off[p][d]);
                    }
                }
            });
            levels.push(Coarse { x: vec![0.0; nc], b: vec![0.0; nc], r: vec![0.0; nc], matrix, agg_of_fine: agg });
            while levels.len() < MAX_LEVELS {
                let last = levels.last().unwrap();
                let m = &last.matrix;
                let n_fine = m.len();
                if n_fine <= MIN_COARSE {
                    break;
                }
                let neighbors = |p: usize, f: &mut dyn FnMut(usize)| {
                    for j in m.row[p] as usize..m.row[p + 1] as usize {
                        if m.val[j] != 0.0 {
                            f(m.col[j] as usize);
                        }
                    }
                };
                let (agg, next_cc) = aggregate(&cc, &neighbors);
                let nc = next_cc.len();
                if nc * 10 > n_fine * 9 {
                    break;
                }
                let matrix = galerkin(n_fine, &agg, nc, &|p| m.diag[p], &|p, f| {
                    for j in m.row[p] as usize..m.row[p + 1] as usize {
                        f(m.col[j] as usize, m.val[j]);
                    }
                });
                cc = next_cc;
                levels.push(Coarse { x: vec![0.0; nc], b: vec![0.0; nc], r: vec![0.0; nc], matrix, agg_of_fine: agg });
            }
        }
        let fine_nbr = nbr.to_vec();
        let fine_off = sys.off.iter().map(|o| o.map(|v| v as f32)).collect();
        let fine_inv_diag = sys.diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        Self {
            levels,
            fine_nbr,
            fine_off,
            fine_diag: sys.diag.clone(),
            fine_inv_diag,
            fine_x: vec![0.0; n],
            coarse_weight: 1.5,
            coarsest_sweeps: 40,
            coarse_cycles: 2,
        }
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.matrix.len()).collect()
    }

    /// `z ≈ A⁻¹ r` by one cycle from a zero guess.
    pub fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let n = z.len();
        let x = &mut self.fine_x;
        x.iter_mut().for_each(|v| *v = 0.0);
        self.fine_sweep(r, true);
        if !self.levels.is_empty() {
            let x = &self.fine_x;
            let first = &mut self.levels[0];
            first.b.iter_mut().for_each(|v| *v = 0.0);
            for p in 0..n {
                let q = &self.fine_nbr[p];
                let o = &self.fine_off[p];
                let mut acc = r[p] - self.fine_diag[p] * x[p];
                for d in 0..6 {
                    acc += o[d] as f64 * x[q[d] as usize];
                }
                first.b[first.agg_of_fine[p] as usize] += acc;
            }
            self.cycle(0);
            let w = self.coarse_weight;
            let first = &self.levels[0];
            for (p, &a) in first.agg_of_fine.iter().enumerate() {
                self.fine_x[p] += w * first.x[a as usize];
            }
        }
        self.fine_sweep(r, false);
        z.copy_from_slice(&self.fine_x);
    }

    fn fine_sweep(&mut self, b: &[f64], forward: bool) {
        let n = b.len();
        let x = &mut self.fine_x;
        for t in 0..n {
            let p = if forward { t } else { n - 1 - t };
            let q = &self.fine_nbr[p];
            let o = &self.fine_off[p];
            let t = |d: usize| o[d] as f64 * x[q[d] as usize];
            let (a, c) = if forward { (0, 1) } else { (1, 0) };
            let rest = b[p] + ((t(c) + t(2)) + (t(3) + t(4))) + t(5);
            x[p] = (rest + t(a)) * self.fine_inv_diag[p];
        }
    }

    fn cycle(&mut self, l: usize) {
        let last = l + 1 == self.levels.len();
        let level = &mut self.levels[l];
        level.x.iter_mut().for_each(|v| *v = 0.0);
        if last {
            for _ in 0..self.coarsest_sweeps {
                level.matrix.sweep(&level.b, &mut level.x, true);
                level.matrix.sweep(&level.b, &mut level.x, false);
            }
            return;
        }
        level.matrix.sweep(&level.b, &mut level.x, true);
        for _ in 0..self.coarse_cycles {
            let (head, tail) = self.levels.split_at_mut(l + 1);
            let level = &mut head[l];
            level.matrix.residual(&level.b, &level.x, &mut level.r);
            let next = &mut tail[0];
            next.b.iter_mut().for_each(|v| *v = 0.0);
            for (p, &a) in next.agg_of_fine.iter().enumerate() {
                next.b[a as usize] += level.r[p];
            }
            self.cycle(l + 1);
            let w = self.coarse_weight;
            let (head, tail) = self.levels.split_at_mut(l + 1);
            let level = &mut head[l];
            let next = &tail[0];
            for (p, &a) in next.agg_of_fine.iter().enumerate() {
                level.x[p] += w * next.x[a as usize];
            }
        }
        let level = &mut self.levels[l];
        level.matrix.sweep(&level.b, &mut level.x, false);
    }
}
