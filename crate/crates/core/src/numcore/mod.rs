//! Dense arithmetic and feedforward networks with reverse-mode gradients.
//!
//! Matrices are `ndarray` arrays in standard (row-major) layout; products go
//! through `ndarray`'s blocked GEMM. Networks are evaluated either on a single
//! vector or on a batch stored column-per-sample.

mod mlp;

pub use mlp::{init_bound, mlp_backward, mlp_forward, mlp_init, mlp_init_with, Activation, GradientBundle, MlpParams, MlpTape};

use ndarray::{Array2, ArrayView2};
use rand::distr::{Distribution, Uniform};

use crate::rng::Rng;

/// Matrix with entries drawn from `U(-bound, bound)`, row-major fill order.
pub(crate) fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Naive triple loop product. Kept for tests that need an oracle independent of GEMM.
pub fn naive_matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[[i, k]] * b[[k, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}
