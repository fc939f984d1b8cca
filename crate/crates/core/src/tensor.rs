//! Dense f32 tensors and the few hot kernels the model needs.
//!
//! Everything is row-major and single-threaded. The kernels below are written
//! so the inner loops run over contiguous slices with independent accumulators,
//! which lets rustc autovectorize them (FMA on this crate's target-cpu=native
//! builds). Summation order is fixed, so results are bit-reproducible run to
//! run on the same build.

use serde::{Deserialize, Serialize};

/// A dense row-major f32 tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        &mut self.data[i * cols..(i + 1) * cols]
    }

    pub fn fill(&mut self, v: f32) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Squared L2 norm accumulated in f64 for a stable global norm.
    pub fn sq_norm_f64(&self) -> f64 {
        self.data.iter().map(|&x| (x as f64) * (x as f64)).sum()
    }
}

/// Dot product with eight independent FMA chains.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 8;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
    let (mut s4, mut s5, mut s6, mut s7) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
    for i in 0..chunks {
        let a = &a[i * 8..i * 8 + 8];
        let b = &b[i * 8..i * 8 + 8];
        s0 = a[0].mul_add(b[0], s0);
        s1 = a[1].mul_add(b[1], s1);
        s2 = a[2].mul_add(b[2], s2);
        s3 = a[3].mul_add(b[3], s3);
        s4 = a[4].mul_add(b[4], s4);
        s5 = a[5].mul_add(b[5], s5);
        s6 = a[6].mul_add(b[6], s6);
        s7 = a[7].mul_add(b[7], s7);
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7)) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = xi.mul_add(alpha, *yi);
    }
}

/// Linear layer forward: `y[m][o] = dot(x[m], w[o])`.
///
/// `w` holds one row per output feature, so both operands of every dot are
/// contiguous.
pub fn linear_fwd(x: &[f32], w: &[f32], m: usize, n_in: usize, n_out: usize, y: &mut [f32]) {
    debug_assert_eq!(x.len(), m * n_in);
    debug_assert_eq!(w.len(), n_out * n_in);
    debug_assert_eq!(y.len(), m * n_out);
    for i in 0..m {
        let xr = &x[i * n_in..(i + 1) * n_in];
        let yr = &mut y[i * n_out..(i + 1) * n_out];
        for o in 0..n_out {
            yr[o] = dot(xr, &w[o * n_in..(o + 1) * n_in]);
        }
    }
}

/// Input gradient of a linear layer: `dx[m] += sum_o dy[m][o] * w[o]`.
pub fn linear_bwd_input(dy: &[f32], w: &[f32], m: usize, n_in: usize, n_out: usize, dx: &mut [f32]) {
    for i in 0..m {
        let dyr = &dy[i * n_out..(i + 1) * n_out];
        let dxr = &mut dx[i * n_in..(i + 1) * n_in];
        for o in 0..n_out {
            let g = dyr[o];
            if g != 0.0 {
                axpy(g, &w[o * n_in..(o + 1) * n_in], dxr);
            }
        }
    }
}

/// Weight gradient of a linear layer: `dw[o] += sum_m dy[m][o] * x[m]`.
pub fn linear_bwd_weight(dy: &[f32], x: &[f32], m: usize, n_in: usize, n_out: usize, dw: &mut [f32]) {
    for i in 0..m {
        let dyr = &dy[i * n_out..(i + 1) * n_out];
        let xr = &x[i * n_in..(i + 1) * n_in];
        for o in 0..n_out {
            let g = dyr[o];
            if g != 0.0 {
                axpy(g, xr, &mut dw[o * n_in..(o + 1) * n_in]);
            }
        }
    }
}

/// In-place softmax over a slice; max-subtracted for stability.
pub fn softmax_inplace(x: &mut [f32]) {
    let mx = x.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in x.iter_mut() {
        *v = (*v - mx).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in x.iter_mut() {
        *v *= inv;
    }
}
