//! Dense reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation of one forward pass; [`Graph::backward`]
//! walks the records in reverse and accumulates gradients. Values are `f64`
//! for gradient checking and `f32` for training, selected by the [`Real`]
//! type parameter.

mod check;
mod conv;
mod graph;
mod optim;
mod params;

pub use check::{grad_check, grad_check_subset, GradCheckReport, GRAD_CHECK_FLOOR};
pub use conv::ConvSpec;
pub use graph::{Graph, Var};
pub use optim::{AdamW, OptimState, PlateauScheduler};
pub use params::{init_seed, ParamStore};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("channel count {channels} is not divisible by {groups} groups")]
    BadGroupCount { channels: usize, groups: usize },
}

/// Scalar type of a tensor.
pub trait Real:
    num_traits::Float + num_traits::FloatConst + Default + Debug + Send + Sync + core::iter::Sum + core::ops::AddAssign + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;

    /// `C = alpha A B + beta C` on strided `m×k` and `k×n` operands.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], a_st: (isize, isize), b: &[Self], b_st: (isize, isize), beta: Self, c: &mut [Self], c_st: (isize, isize));
}

fn check_extent(len: usize, rows: usize, cols: usize, st: (isize, isize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * st.0 + (cols as isize - 1) * st.1;
    assert!(st.0 >= 0 && st.1 >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_real {
    ($t:ty, $gemm:ident) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }
            fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], a_st: (isize, isize), b: &[Self], b_st: (isize, isize), beta: Self, c: &mut [Self], c_st: (isize, isize)) {
                check_extent(a.len(), m, k, a_st);
                check_extent(b.len(), k, n, b_st);
                check_extent(c.len(), m, n, c_st);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index reached through the strides was bounds
                // checked above; `c` does not alias `a` or `b` (distinct borrows).
                unsafe {
                    matrixmultiply::$gemm(
                        m, k, n, alpha, a.as_ptr(), a_st.0, a_st.1, b.as_ptr(), b_st.0, b_st.1, beta, c.as_mut_ptr(), c_st.0, c_st.1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, sgemm);
impl_real!(f64, dgemm);

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(dims: &[usize], data: Vec<T>) -> Result<Self, AutodiffError> {
        if numel(dims) != data.len() {
            return Err(AutodiffError::ShapeMismatch("data length does not match dims"));
        }
        Ok(Self { dims: dims.to_vec(), data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), data: vec![T::zero(); numel(dims)] }
    }

    pub fn full(dims: &[usize], v: T) -> Self {
        Self { dims: dims.to_vec(), data: vec![v; numel(dims)] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| U::of(v.f64())).collect() }
    }
}

pub fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}
