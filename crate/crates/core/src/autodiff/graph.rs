use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Bernoulli, Distribution};

use super::conv::{ConvGeom, ConvSpec};
use super::{numel, AutodiffError, Real, Tensor};

/// Handle of a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Sum(Var),
    Mean(Var),
    /// `a [m, k] · bᵀ` with `b [n, k]`.
    MatMulT(Var, Var, [usize; 3]),
    /// Bias per channel of `[N, C, inner]`.
    AddBias(Var, Var, [usize; 3]),
    Conv(Var, Var, ConvGeom),
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize, xhat: Vec<T>, inv_std: Vec<T> },
    Sigmoid(Var),
    Tanh(Var),
    Silu(Var),
    Gelu(Var),
    MulConst(Var, Vec<T>),
    /// Concatenation along axis 1 of `[N, C_i, inner]` operands.
    Concat(Vec<(Var, usize)>, [usize; 2]),
    Slice(Var, [usize; 5]),
    Reshape(Var),
    Gather(Var, Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    dims: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Tape of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Vec<T>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044715;

/// `[N, C, inner]` view of dims with at least two axes; rank-1 counts as
/// `[1, C, 1]`.
fn channel_view(dims: &[usize]) -> [usize; 3] {
    match dims.len() {
        0 => [1, 1, 1],
        1 => [1, dims[0], 1],
        _ => [dims[0], dims[1], numel(&dims[2..])],
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, dims: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(numel(&dims), value.len());
        self.nodes.push(Node { dims, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Input that gradients do not flow into.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t.dims, t.data, Op::Leaf, false)
    }

    /// Leaf whose gradient is collected by [`Graph::backward`].
    pub fn param(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.dims.clone(), t.data.clone(), Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].dims
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        Tensor { dims: self.nodes[v.0].dims.clone(), data: self.nodes[v.0].value.clone() }
    }

    /// Gradient of the last [`Graph::backward`] target with respect to a
    /// leaf; `None` when nothing flowed into it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).filter(|g| !g.is_empty()).map(|g| g.as_slice())
    }

    fn ng(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<(), AutodiffError> {
        if self.nodes[a.0].dims != self.nodes[b.0].dims {
            return Err(AutodiffError::ShapeMismatch("elementwise operands differ in shape"));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var, AutodiffError> {
        self.same_shape(a, b)?;
        let value = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| f(*x, *y)).collect();
        let ng = self.ng(&[a, b]);
        Ok(self.push(self.nodes[a.0].dims.clone(), value, op, ng))
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        let ng = self.ng(&[a]);
        self.push(self.nodes[a.0].dims.clone(), value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    /// Elementwise product with a constant of the same length.
    pub fn mul_const(&mut self, a: Var, m: Vec<T>) -> Result<Var, AutodiffError> {
        if m.len() != self.nodes[a.0].value.len() {
            return Err(AutodiffError::ShapeMismatch("constant factor length differs"));
        }
        let value = self.nodes[a.0].value.iter().zip(&m).map(|(x, y)| *x * *y).collect();
        let ng = self.ng(&[a]);
        Ok(self.push(self.nodes[a.0].dims.clone(), value, Op::MulConst(a, m), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().copied().sum();
        let ng = self.ng(&[a]);
        self.push(vec![1], vec![s], Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len().max(1);
        let s: T = self.nodes[a.0].value.iter().copied().sum();
        let ng = self.ng(&[a]);
        self.push(vec![1], vec![s / T::of(n as f64)], Op::Mean(a), ng)
    }

    /// `a · bᵀ` for `a [m, k]` and `b [n, k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (da, db) = (&self.nodes[a.0].dims, &self.nodes[b.0].dims);
        if da.len() != 2 || db.len() != 2 || da[1] != db[1] {
            return Err(AutodiffError::ShapeMismatch("matmul_t needs [m, k] and [n, k]"));
        }
        let (m, k, n) = (da[0], da[1], db[0]);
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, T::one(), &self.nodes[a.0].value, (k as isize, 1), &self.nodes[b.0].value, (1, k as isize), T::zero(), &mut out, (n as isize, 1));
        let ng = self.ng(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::MatMulT(a, b, [m, k, n]), ng))
    }

    /// Adds `b[c]` to every element of channel `c` (axis 1; the only axis
    /// of a vector).
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, AutodiffError> {
        let v = channel_view(&self.nodes[x.0].dims);
        if self.nodes[b.0].value.len() != v[1] {
            return Err(AutodiffError::ShapeMismatch("bias length differs from channel count"));
        }
        let bias = &self.nodes[b.0].value;
        let mut out = self.nodes[x.0].value.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += bias[(i / v[2]) % v[1]];
        }
        let ng = self.ng(&[x, b]);
        Ok(self.push(self.nodes[x.0].dims.clone(), out, Op::AddBias(x, b, v), ng))
    }

    /// Affine map `x Wᵀ + b` with `W [out, in]`, for `x [in]` or `[B, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let vector = self.nodes[x.0].dims.len() == 1;
        let x2 = if vector {
            let n = self.nodes[x.0].dims[0];
            self.reshape(x, &[1, n])?
        } else {
            x
        };
        let mut y = self.matmul_t(x2, w)?;
        if let Some(b) = b {
            y = self.add_bias(y, b)?;
        }
        if vector {
            let n = self.nodes[y.0].dims[1];
            y = self.reshape(y, &[n])?;
        }
        Ok(y)
    }

    /// Cross-correlation of `x [N, C, (D,) H, W]` with `w [Cout, C, (kD,) kH, kW]`.
    pub fn conv(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var, AutodiffError> {
        let geom = ConvGeom::new(&self.nodes[x.0].dims, &self.nodes[w.0].dims, spec)?;
        let rank3 = self.nodes[x.0].dims.len() == 5;
        let dims = geom.out_dims(rank3);
        let mut out = vec![T::zero(); numel(&dims)];
        geom.forward(&self.nodes[x.0].value, &self.nodes[w.0].value, &mut out);
        let ng = self.ng(&[x, w]);
        let y = self.push(dims, out, Op::Conv(x, w, geom), ng);
        match b {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    /// Group normalization over `[N, C, ...]` with population variance and
    /// per-channel affine `gamma`, `beta`.
    pub fn group_norm(&mut self, x: Var, groups: usize, gamma: Var, beta: Var, eps: f64) -> Result<Var, AutodiffError> {
        let [n, c, inner] = channel_view(&self.nodes[x.0].dims);
        if groups == 0 || c % groups != 0 {
            return Err(AutodiffError::BadGroupCount { channels: c, groups });
        }
        if self.nodes[gamma.0].value.len() != c || self.nodes[beta.0].value.len() != c {
            return Err(AutodiffError::ShapeMismatch("group norm affine length differs from channels"));
        }
        let xs = &self.nodes[x.0].value;
        let (g_, b_) = (&self.nodes[gamma.0].value, &self.nodes[beta.0].value);
        let m = (c / groups) * inner;
        let mut xhat = vec![T::zero(); xs.len()];
        let mut out = vec![T::zero(); xs.len()];
        let mut inv_std = vec![T::zero(); n * groups];
        for s in 0..n * groups {
            let seg = s * m..(s + 1) * m;
            let mean = xs[seg.clone()].iter().copied().sum::<T>() / T::of(m as f64);
            let var = xs[seg.clone()].iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / T::of(m as f64);
            let is = T::one() / (var + T::of(eps)).sqrt();
            inv_std[s] = is;
            for i in seg {
                let ch = (i / inner) % c;
                xhat[i] = (xs[i] - mean) * is;
                out[i] = g_[ch] * xhat[i] + b_[ch];
            }
        }
        let ng = self.ng(&[x, gamma, beta]);
        Ok(self.push(self.nodes[x.0].dims.clone(), out, Op::GroupNorm { x, gamma, beta, groups, xhat, inv_std }, ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), |x| x.tanh())
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Silu(a), |x| x * sigmoid(x))
    }

    /// Tanh approximation `0.5 x (1 + tanh(sqrt(2/π) (x + 0.044715 x³)))`.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Gelu(a), |x| {
            let u = T::of(GELU_C) * (x + T::of(GELU_A) * x * x * x);
            T::of(0.5) * x * (T::one() + u.tanh())
        })
    }

    /// Inverted dropout: in training, units survive with probability `1 - p`
    /// and are scaled by `1 / (1 - p)`; the mask depends only on `seed`.
    /// Identity outside training.
    pub fn dropout(&mut self, a: Var, p: f64, training: bool, seed: u64) -> Result<Var, AutodiffError> {
        if !training || p <= 0.0 {
            return Ok(a);
        }
        if p >= 1.0 {
            return Err(AutodiffError::ShapeMismatch("dropout probability must lie in [0, 1)"));
        }
        let keep = Bernoulli::new(1.0 - p).map_err(|_| AutodiffError::ShapeMismatch("dropout probability must lie in [0, 1)"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = T::of(1.0 / (1.0 - p));
        let mask = (0..self.nodes[a.0].value.len()).map(|_| if keep.sample(&mut rng) { scale } else { T::zero() }).collect();
        self.mul_const(a, mask)
    }

    /// Concatenation along axis 1.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or(AutodiffError::ShapeMismatch("concat needs at least one operand"))?;
        let d0 = self.nodes[first.0].dims.clone();
        if d0.len() < 2 {
            return Err(AutodiffError::ShapeMismatch("concat needs [N, C, ...] operands"));
        }
        let [n, _, inner] = channel_view(&d0);
        let mut total = 0;
        let mut list = Vec::with_capacity(parts.len());
        for p in parts {
            let d = &self.nodes[p.0].dims;
            if d.len() != d0.len() || d[0] != d0[0] || d[2..] != d0[2..] {
                return Err(AutodiffError::ShapeMismatch("concat operands differ outside axis 1"));
            }
            list.push((*p, d[1]));
            total += d[1];
        }
        let mut out = Vec::with_capacity(n * total * inner);
        for s in 0..n {
            for (p, c) in &list {
                let v = &self.nodes[p.0].value;
                out.extend_from_slice(&v[s * c * inner..(s + 1) * c * inner]);
            }
        }
        let mut dims = d0;
        dims[1] = total;
        let ng = self.ng(parts);
        Ok(self.push(dims, out, Op::Concat(list, [n, inner]), ng))
    }

    /// Channels `start..start + len` along axis 1.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let d = self.nodes[a.0].dims.clone();
        if d.len() < 2 || start + len > d[1] {
            return Err(AutodiffError::ShapeMismatch("slice out of range"));
        }
        let [n, c, inner] = channel_view(&d);
        let v = &self.nodes[a.0].value;
        let mut out = Vec::with_capacity(n * len * inner);
        for s in 0..n {
            out.extend_from_slice(&v[(s * c + start) * inner..(s * c + start + len) * inner]);
        }
        let mut dims = d;
        dims[1] = len;
        let ng = self.ng(&[a]);
        Ok(self.push(dims, out, Op::Slice(a, [n, c, inner, start, len]), ng))
    }

    pub fn reshape(&mut self, a: Var, dims: &[usize]) -> Result<Var, AutodiffError> {
        if numel(dims) != self.nodes[a.0].value.len() {
            return Err(AutodiffError::ShapeMismatch("reshape changes element count"));
        }
        let v = self.nodes[a.0].value.clone();
        let ng = self.ng(&[a]);
        Ok(self.push(dims.to_vec(), v, Op::Reshape(a), ng))
    }

    /// `out[i] = a[index[i]]` as a vector, or with `dims` when given.
    pub fn gather(&mut self, a: Var, index: Vec<usize>, dims: Option<&[usize]>) -> Result<Var, AutodiffError> {
        let v = &self.nodes[a.0].value;
        if index.iter().any(|i| *i >= v.len()) {
            return Err(AutodiffError::ShapeMismatch("gather index out of range"));
        }
        let out: Vec<T> = index.iter().map(|i| v[*i]).collect();
        let dims = match dims {
            Some(d) if numel(d) == out.len() => d.to_vec(),
            Some(_) => return Err(AutodiffError::ShapeMismatch("gather dims do not match index count")),
            None => vec![out.len()],
        };
        let ng = self.ng(&[a]);
        Ok(self.push(dims, out, Op::Gather(a, index), ng))
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Gradients of the scalar `target` with respect to every leaf created
    /// by [`Graph::param`]. Nodes are visited once, in reverse creation
    /// order, which is a reverse topological order.
    pub fn backward(&mut self, target: Var) {
        let n = self.nodes.len();
        self.grads = vec![Vec::new(); n];
        if !self.nodes[target.0].needs_grad {
            return;
        }
        self.grads[target.0] = vec![T::one(); self.nodes[target.0].value.len()];
        for id in (0..=target.0).rev() {
            if self.grads[id].is_empty() {
                continue;
            }
            let (lo, hi) = self.grads.split_at_mut(id);
            let g = &hi[0];
            let node = &self.nodes[id];
            propagate(&self.nodes, node, g, lo);
            if !matches!(node.op, Op::Leaf) {
                hi[0] = Vec::new();
            }
        }
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradient buffer of `v`, allocated on first use.
fn slot<'a, T: Real>(nodes: &[Node<T>], grads: &'a mut [Vec<T>], v: Var) -> Option<&'a mut Vec<T>> {
    let node = &nodes[v.0];
    if !node.needs_grad {
        return None;
    }
    let g = &mut grads[v.0];
    if g.is_empty() {
        *g = vec![T::zero(); node.value.len()];
    }
    Some(g)
}

fn propagate<T: Real>(nodes: &[Node<T>], node: &Node<T>, g: &[T], grads: &mut [Vec<T>]) {
    let val = |v: Var| nodes[v.0].value.as_slice();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) | Op::Sub(a, b) => {
            let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(d, s)| *d += *s);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gb.iter_mut().zip(g).for_each(|(d, s)| *d += sign * *s);
            }
        }
        Op::Mul(a, b) => {
            let (va, vb) = (val(*a).to_vec(), val(*b));
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g.iter().zip(vb)).for_each(|(d, (s, y))| *d += *s * *y);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gb.iter_mut().zip(g.iter().zip(&va)).for_each(|(d, (s, x))| *d += *s * *x);
            }
        }
        Op::Div(a, b) => {
            let (va, vb) = (val(*a), val(*b));
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g.iter().zip(vb)).for_each(|(d, (s, y))| *d += *s / *y);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for i in 0..gb.len() {
                    gb[i] += -g[i] * va[i] / (vb[i] * vb[i]);
                }
            }
        }
        Op::Scale(a, c) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(d, s)| *d += *s * *c);
            }
        }
        Op::AddScalar(a) | Op::Reshape(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(d, s)| *d += *s);
            }
        }
        Op::Sum(a) | Op::Mean(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let s = if matches!(node.op, Op::Mean(_)) { g[0] / T::of(ga.len().max(1) as f64) } else { g[0] };
                ga.iter_mut().for_each(|d| *d += s);
            }
        }
        Op::MatMulT(a, b, [m, k, n]) => {
            let (m, k, n) = (*m, *k, *n);
            let (va, vb) = (val(*a), val(*b));
            if let Some(ga) = slot(nodes, grads, *a) {
                T::gemm(m, n, k, T::one(), g, (n as isize, 1), vb, (k as isize, 1), T::one(), ga, (k as isize, 1));
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                T::gemm(n, m, k, T::one(), g, (1, n as isize), va, (k as isize, 1), T::one(), gb, (k as isize, 1));
            }
        }
        Op::AddBias(x, b, [_, c, inner]) => {
            if let Some(gx) = slot(nodes, grads, *x) {
                gx.iter_mut().zip(g).for_each(|(d, s)| *d += *s);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for (i, s) in g.iter().enumerate() {
                    gb[(i / inner) % c] += *s;
                }
            }
        }
        Op::Conv(x, w, geom) => {
            let (vx, vw) = (val(*x), val(*w));
            // Two separate passes keep the borrows of `grads` disjoint.
            if let Some(gw) = slot(nodes, grads, *w) {
                geom.backward(vx, vw, g, None, Some(gw));
            }
            if let Some(gx) = slot(nodes, grads, *x) {
                geom.backward(vx, vw, g, Some(gx), None);
            }
        }
        Op::GroupNorm { x, gamma, beta, groups, xhat, inv_std } => {
            let [_, c, inner] = channel_view(&node.dims);
            let vg = val(*gamma);
            if let Some(gg) = slot(nodes, grads, *gamma) {
                for i in 0..g.len() {
                    gg[(i / inner) % c] += g[i] * xhat[i];
                }
            }
            if let Some(gb) = slot(nodes, grads, *beta) {
                for i in 0..g.len() {
                    gb[(i / inner) % c] += g[i];
                }
            }
            if let Some(gx) = slot(nodes, grads, *x) {
                let m = (c / groups) * inner;
                let mf = T::of(m as f64);
                for (s, is) in inv_std.iter().enumerate() {
                    let seg = s * m..(s + 1) * m;
                    let (mut sum_d, mut sum_dx) = (T::zero(), T::zero());
                    for i in seg.clone() {
                        let d = g[i] * vg[(i / inner) % c];
                        sum_d += d;
                        sum_dx += d * xhat[i];
                    }
                    let (md, mdx) = (sum_d / mf, sum_dx / mf);
                    for i in seg {
                        let d = g[i] * vg[(i / inner) % c];
                        gx[i] += *is * (d - md - xhat[i] * mdx);
                    }
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..g.len() {
                    let y = node.value[i];
                    ga[i] += g[i] * y * (T::one() - y);
                }
            }
        }
        Op::Tanh(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..g.len() {
                    let y = node.value[i];
                    ga[i] += g[i] * (T::one() - y * y);
                }
            }
        }
        Op::Silu(a) => {
            let va = val(*a);
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..g.len() {
                    let s = sigmoid(va[i]);
                    ga[i] += g[i] * s * (T::one() + va[i] * (T::one() - s));
                }
            }
        }
        Op::Gelu(a) => {
            let va = val(*a);
            if let Some(ga) = slot(nodes, grads, *a) {
                let (c, k) = (T::of(GELU_C), T::of(GELU_A));
                let half = T::of(0.5);
                for i in 0..g.len() {
                    let x = va[i];
                    let t = (c * (x + k * x * x * x)).tanh();
                    let du = c * (T::one() + T::of(3.0) * k * x * x);
                    ga[i] += g[i] * (half * (T::one() + t) + half * x * (T::one() - t * t) * du);
                }
            }
        }
        Op::MulConst(a, m) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..g.len() {
                    ga[i] += g[i] * m[i];
                }
            }
        }
        Op::Concat(list, [n, inner]) => {
            let total: usize = list.iter().map(|(_, c)| c).sum();
            let mut offset = 0;
            for (p, c) in list {
                if let Some(gp) = slot(nodes, grads, *p) {
                    for s in 0..*n {
                        let src = &g[(s * total + offset) * inner..(s * total + offset + c) * inner];
                        let dst = &mut gp[s * c * inner..(s + 1) * c * inner];
                        dst.iter_mut().zip(src).for_each(|(d, v)| *d += *v);
                    }
                }
                offset += c;
            }
        }
        Op::Slice(a, [n, c, inner, start, len]) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for s in 0..*n {
                    let dst = &mut ga[(s * c + start) * inner..(s * c + start + len) * inner];
                    let src = &g[s * len * inner..(s + 1) * len * inner];
                    dst.iter_mut().zip(src).for_each(|(d, v)| *d += *v);
                }
            }
        }
        Op::Gather(a, index) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for (i, j) in index.iter().enumerate() {
                    ga[*j] += g[i];
                }
            }
        }
    }
}
