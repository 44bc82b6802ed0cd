//! Convolution (cross-correlation) over 2 or 3 spatial axes by im2col and
//! matrix products. Two-dimensional inputs run as depth-1 volumes.

use alloc::vec;
use alloc::vec::Vec;

use super::{AutodiffError, Real};

/// Stride, zero padding and dilation per spatial axis `(d, h, w)`. For 2-D
/// convolutions only the `h` and `w` entries are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub dilation: [usize; 3],
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self { stride: [1; 3], padding: [0; 3], dilation: [1; 3] }
    }
}

impl ConvSpec {
    /// Unit stride with the padding that preserves extents for an odd
    /// `kernel` at the given dilation.
    pub fn same(kernel: [usize; 3], dilation: [usize; 3]) -> Self {
        let pad = |a: usize| dilation[a] * (kernel[a] - 1) / 2;
        Self { stride: [1; 3], padding: [pad(0), pad(1), pad(2)], dilation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub cout: usize,
    pub inp: [usize; 3],
    pub k: [usize; 3],
    pub out: [usize; 3],
    pub spec: ConvSpec,
}

impl ConvGeom {
    /// Geometry from input dims `[N, C, (D,) H, W]` and kernel dims
    /// `[Cout, C, (kD,) kH, kW]`.
    pub fn new(x: &[usize], w: &[usize], spec: ConvSpec) -> Result<Self, AutodiffError> {
        let rank = x.len().checked_sub(2).ok_or(AutodiffError::ShapeMismatch("conv input needs batch and channel axes"))?;
        if !(rank == 2 || rank == 3) || w.len() != x.len() {
            return Err(AutodiffError::ShapeMismatch("conv supports rank 2 or 3 with matching kernel rank"));
        }
        if w[1] != x[1] {
            return Err(AutodiffError::ShapeMismatch("kernel input channels differ from input channels"));
        }
        let (inp, k, spec) = if rank == 3 {
            ([x[2], x[3], x[4]], [w[2], w[3], w[4]], spec)
        } else {
            let mut s = spec;
            s.stride[0] = 1;
            s.padding[0] = 0;
            s.dilation[0] = 1;
            ([1, x[2], x[3]], [1, w[2], w[3]], s)
        };
        let mut out = [0; 3];
        for a in 0..3 {
            let span = spec.dilation[a] * (k[a].max(1) - 1) + 1;
            let padded = inp[a] + 2 * spec.padding[a];
            if spec.stride[a] == 0 || spec.dilation[a] == 0 || k[a] == 0 || padded < span {
                return Err(AutodiffError::ShapeMismatch("kernel larger than padded input"));
            }
            out[a] = (padded - span) / spec.stride[a] + 1;
        }
        Ok(Self { n: x[0], cin: x[1], cout: w[0], inp, k, out, spec })
    }

    pub fn in_vol(&self) -> usize {
        self.inp[0] * self.inp[1] * self.inp[2]
    }

    pub fn out_vol(&self) -> usize {
        self.out[0] * self.out[1] * self.out[2]
    }

    pub fn k_vol(&self) -> usize {
        self.k[0] * self.k[1] * self.k[2]
    }

    /// Output dims in the rank of the input.
    pub fn out_dims(&self, rank3: bool) -> Vec<usize> {
        if rank3 {
            vec![self.n, self.cout, self.out[0], self.out[1], self.out[2]]
        } else {
            vec![self.n, self.cout, self.out[1], self.out[2]]
        }
    }

    /// Input position along `axis` read by output `o` and kernel tap `t`.
    #[inline]
    fn src(&self, axis: usize, o: usize, t: usize) -> Option<usize> {
        let s = self.spec;
        let p = (o * s.stride[axis] + t * s.dilation[axis]) as isize - s.padding[axis] as isize;
        (p >= 0 && (p as usize) < self.inp[axis]).then_some(p as usize)
    }

    /// Columns `[cin * k_vol, out_vol]` of one sample.
    fn im2col<T: Real>(&self, x: &[T], cols: &mut [T]) {
        let ov = self.out_vol();
        let [id, ih, iw] = self.inp;
        let mut row = 0;
        for c in 0..self.cin {
            let xc = &x[c * id * ih * iw..(c + 1) * id * ih * iw];
            for kd in 0..self.k[0] {
                for kh in 0..self.k[1] {
                    for kw in 0..self.k[2] {
                        let dst = &mut cols[row * ov..(row + 1) * ov];
                        let mut q = 0;
                        for od in 0..self.out[0] {
                            let sd = self.src(0, od, kd);
                            for oh in 0..self.out[1] {
                                let sh = self.src(1, oh, kh);
                                for ow in 0..self.out[2] {
                                    dst[q] = match (sd, sh, self.src(2, ow, kw)) {
                                        (Some(d), Some(h), Some(w)) => xc[(d * ih + h) * iw + w],
                                        _ => T::zero(),
                                    };
                                    q += 1;
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    /// Adds columns back onto one sample's input gradient.
    fn col2im<T: Real>(&self, cols: &[T], dx: &mut [T]) {
        let ov = self.out_vol();
        let [id, ih, iw] = self.inp;
        let mut row = 0;
        for c in 0..self.cin {
            let dxc = &mut dx[c * id * ih * iw..(c + 1) * id * ih * iw];
            for kd in 0..self.k[0] {
                for kh in 0..self.k[1] {
                    for kw in 0..self.k[2] {
                        let src = &cols[row * ov..(row + 1) * ov];
                        let mut q = 0;
                        for od in 0..self.out[0] {
                            let sd = self.src(0, od, kd);
                            for oh in 0..self.out[1] {
                                let sh = self.src(1, oh, kh);
                                for ow in 0..self.out[2] {
                                    if let (Some(d), Some(h), Some(w)) = (sd, sh, self.src(2, ow, kw)) {
                                        dxc[(d * ih + h) * iw + w] += src[q];
                                    }
                                    q += 1;
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    /// `out[n, co] = sum w[co, ci, taps] x[n, ci, ...]` without bias.
    pub fn forward<T: Real>(&self, x: &[T], w: &[T], out: &mut [T]) {
        let (ck, ov) = (self.cin * self.k_vol(), self.out_vol());
        let mut cols = vec![T::zero(); ck * ov];
        for n in 0..self.n {
            self.im2col(&x[n * self.cin * self.in_vol()..(n + 1) * self.cin * self.in_vol()], &mut cols);
            let o = &mut out[n * self.cout * ov..(n + 1) * self.cout * ov];
            T::gemm(self.cout, ck, ov, T::one(), w, (ck as isize, 1), &cols, (ov as isize, 1), T::zero(), o, (ov as isize, 1));
        }
    }

    /// Accumulates input and kernel gradients.
    pub fn backward<T: Real>(&self, x: &[T], w: &[T], dout: &[T], dx: Option<&mut [T]>, dw: Option<&mut [T]>) {
        let (ck, ov, iv) = (self.cin * self.k_vol(), self.out_vol(), self.cin * self.in_vol());
        let mut cols = vec![T::zero(); ck * ov];
        if let Some(dw) = dw {
            for n in 0..self.n {
                self.im2col(&x[n * iv..(n + 1) * iv], &mut cols);
                let g = &dout[n * self.cout * ov..(n + 1) * self.cout * ov];
                T::gemm(self.cout, ov, ck, T::one(), g, (ov as isize, 1), &cols, (1, ov as isize), T::one(), dw, (ck as isize, 1));
            }
        }
        if let Some(dx) = dx {
            for n in 0..self.n {
                let g = &dout[n * self.cout * ov..(n + 1) * self.cout * ov];
                T::gemm(ck, self.cout, ov, T::one(), w, (1, ck as isize), g, (ov as isize, 1), T::zero(), &mut cols, (ov as isize, 1));
                self.col2im(&cols, &mut dx[n * iv..(n + 1) * iv]);
            }
        }
    }
}
