use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::uniform_matrix;
use crate::error::{shape_err, Error, Result};
use crate::rng::{self, domain, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, values: &mut Array2<f64>) {
        if self == Activation::Tanh {
            values.mapv_inplace(f64::tanh);
        }
    }

    /// Derivative expressed through the activation's output value.
    #[inline]
    fn slope_at_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Linear => 1.0,
        }
    }
}

/// Feedforward network: affine layers with `hidden_activation` between them and
/// `output_activation` after the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    /// `weights[i]` has shape `(layer_sizes[i + 1], layer_sizes[i])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

/// Half-width of the uniform initialization interval for a layer with `n_in` inputs.
///
/// Parameters are drawn from `U(-sqrt(m), sqrt(m))` with `m = 1/sqrt(n_in)`,
/// i.e. the bound is `n_in^(-1/4)`.
pub fn init_bound(n_in: usize) -> f64 {
    (1.0 / (n_in as f64).sqrt()).sqrt()
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "network needs at least an input and an output width, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::Config(format!("layer widths must be positive, got {layer_sizes:?}")));
    }
    Ok(())
}

/// Deterministic initialization from a 64-bit seed.
pub fn mlp_init(layer_sizes: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<MlpParams> {
    let mut rng = rng::stream(seed, domain::MODEL_INIT, 0);
    mlp_init_with(layer_sizes, hidden, output, &mut rng)
}

/// Same as [`mlp_init`] but drawing from a caller-owned stream. Weights of a
/// layer are drawn row-major, then its bias.
pub fn mlp_init_with(layer_sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<MlpParams> {
    check_sizes(layer_sizes)?;
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for pair in layer_sizes.windows(2) {
        let bound = init_bound(pair[0]);
        weights.push(uniform_matrix(pair[1], pair[0], bound, rng));
        biases.push(uniform_matrix(pair[1], 1, bound, rng).into_shape_with_order(pair[1]).expect("column"));
    }
    Ok(MlpParams {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        hidden_activation: hidden,
        output_activation: output,
    })
}

pub fn mlp_forward(params: &MlpParams, input: ArrayView1<f64>) -> Result<Array1<f64>> {
    params.forward(input)
}

/// Gradient of `upstream . f(input)` with respect to every parameter and the input.
pub fn mlp_backward(params: &MlpParams, input: ArrayView1<f64>, upstream: ArrayView1<f64>) -> Result<GradientBundle> {
    if upstream.len() != params.output_width() {
        return Err(shape_err("upstream gradient", params.output_width(), upstream.len()));
    }
    let x = input.to_owned().insert_axis(Axis(1));
    let tape = params.forward_batch(x.view())?;
    let up = upstream.to_owned().insert_axis(Axis(1));
    let mut grad = GradientBundle::zeros_like(params);
    let dx = params.backward_batch(&tape, up.view(), &mut grad)?;
    grad.input = Some(dx.column(0).to_owned());
    Ok(grad)
}

/// Activations recorded by a batched forward pass. `acts[0]` is the input,
/// `acts[l]` the post-activation output of transition `l`.
#[derive(Clone, Debug)]
pub struct MlpTape {
    acts: Vec<Array2<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.acts.last().expect("tape holds the input at least").view()
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.acts.pop().expect("tape holds the input at least")
    }
}

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        check_sizes(layer_sizes)?;
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes.windows(2).map(|p| Array2::zeros((p[1], p[0]))).collect(),
            biases: layer_sizes.windows(2).map(|p| Array1::zeros(p[1])).collect(),
            hidden_activation: hidden,
            output_activation: output,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("validated sizes")
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Checks the shape invariants and that all entries are finite.
    pub fn validate(&self) -> Result<()> {
        check_sizes(&self.layer_sizes)?;
        let n = self.layer_sizes.len() - 1;
        if self.weights.len() != n || self.biases.len() != n {
            return Err(Error::Shape(format!(
                "{} layer transitions but {} weight matrices and {} biases",
                n,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (i, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[i].dim() != (pair[1], pair[0]) {
                return Err(Error::Shape(format!(
                    "weight {i}: expected {}x{}, got {:?}",
                    pair[1],
                    pair[0],
                    self.weights[i].dim()
                )));
            }
            if self.biases[i].len() != pair[1] {
                return Err(shape_err(&format!("bias {i}"), pair[1], self.biases[i].len()));
            }
        }
        if self.param_slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("network contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn forward(&self, input: ArrayView1<f64>) -> Result<Array1<f64>> {
        if input.len() != self.input_width() {
            return Err(shape_err("network input", self.input_width(), input.len()));
        }
        let mut h = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = w.dot(&h) + b;
            if self.activation(l) == Activation::Tanh {
                h.mapv_inplace(f64::tanh);
            }
        }
        Ok(h)
    }

    /// Forward pass over a batch stored one sample per column.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<MlpTape> {
        if x.nrows() != self.input_width() {
            return Err(shape_err("network batch input rows", self.input_width(), x.nrows()));
        }
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let prev = acts.last().expect("input pushed");
            let mut h = Array2::zeros((w.nrows(), prev.ncols()));
            general_mat_mul(1.0, w, prev, 0.0, &mut h);
            h += &b.view().insert_axis(Axis(1));
            self.activation(l).apply(&mut h);
            acts.push(h);
        }
        Ok(MlpTape { acts })
    }

    /// Backpropagates `upstream` (output-width x batch) through a recorded pass.
    /// Parameter gradients are summed over the batch into `grad`; the gradient
    /// with respect to the batch input is returned.
    pub fn backward_batch(&self, tape: &MlpTape, upstream: ArrayView2<f64>, grad: &mut GradientBundle) -> Result<Array2<f64>> {
        let out = tape.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match network output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let last = self.weights.len() - 1;
        let act = self.output_activation;
        let mut delta = upstream.to_owned();
        if act != Activation::Linear {
            delta.zip_mut_with(&out, |d, &a| *d *= act.slope_at_output(a));
        }
        for l in (0..=last).rev() {
            general_mat_mul(1.0, &delta, &tape.acts[l].t(), 1.0, &mut grad.weights[l]);
            grad.biases[l] += &delta.sum_axis(Axis(1));
            let mut prev = Array2::zeros((self.weights[l].ncols(), delta.ncols()));
            general_mat_mul(1.0, &self.weights[l].t(), &delta, 0.0, &mut prev);
            if l > 0 {
                let act = self.hidden_activation;
                prev.zip_mut_with(&tape.acts[l], |d, &a| *d *= act.slope_at_output(a));
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Parameter storage in canonical order: for each layer, weights (row-major) then bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

/// Gradients laid out exactly like an [`MlpParams`], plus the optional input gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Option<Array1<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(params: &MlpParams) -> Self {
        GradientBundle {
            weights: params.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: params.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            input: None,
        }
    }

    pub fn mirrors(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.weights.len()
            && self.biases.len() == params.biases.len()
            && self.weights.iter().zip(&params.weights).all(|(g, w)| g.dim() == w.dim())
            && self.biases.iter().zip(&params.biases).all(|(g, b)| g.len() == b.len())
    }

    pub fn add_assign(&mut self, other: &GradientBundle) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    /// Same ordering as [`MlpParams::param_slices`].
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::naive_matmul;
    use ndarray::{array, Array};
    use rand::Rng as _;

    fn random_vec(n: usize, rng: &mut Rng) -> Array1<f64> {
        Array::from_shape_fn(n, |_| rng.random_range(-1.0..1.0))
    }

    /// Independent evaluation with explicit loops.
    fn naive_forward(p: &MlpParams, x: &Array1<f64>) -> Array1<f64> {
        let mut h: Vec<f64> = x.to_vec();
        for (l, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
            let mut next = vec![0.0; w.nrows()];
            for i in 0..w.nrows() {
                let mut acc = b[i];
                for j in 0..w.ncols() {
                    acc += w[[i, j]] * h[j];
                }
                next[i] = if l + 1 < p.weights.len() { acc.tanh() } else { acc };
            }
            h = next;
        }
        Array1::from(h)
    }

    #[test]
    fn init_respects_bound_and_seed() {
        let p = mlp_init(&[2, 100, 2], Activation::Tanh, Activation::Linear, 42).unwrap();
        let bound = 0.5f64.powf(0.25);
        assert!((init_bound(2) - bound).abs() < 1e-15);
        assert!(p.weights[0].iter().all(|v| v.abs() <= bound));
        assert!(p.biases[0].iter().all(|v| v.abs() <= bound));
        assert!(p.weights[0].iter().any(|v| v.abs() > 0.9 * bound));
        // second layer has 100 inputs
        assert!(p.weights[1].iter().all(|v| v.abs() <= 100f64.powf(-0.25)));
        let q = mlp_init(&[2, 100, 2], Activation::Tanh, Activation::Linear, 42).unwrap();
        assert_eq!(p, q);
        let r = mlp_init(&[2, 100, 2], Activation::Tanh, Activation::Linear, 43).unwrap();
        assert_ne!(p, r);
        p.validate().unwrap();
    }

    #[test]
    fn unit_input_width_gives_unit_bound() {
        assert_eq!(init_bound(1), 1.0);
        let p = mlp_init(&[1, 50], Activation::Tanh, Activation::Linear, 1).unwrap();
        assert!(p.weights[0].iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(matches!(mlp_init(&[], Activation::Tanh, Activation::Linear, 0), Err(Error::Config(_))));
        assert!(matches!(mlp_init(&[3], Activation::Tanh, Activation::Linear, 0), Err(Error::Config(_))));
        assert!(matches!(mlp_init(&[3, 0, 1], Activation::Tanh, Activation::Linear, 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[3, 7, 2], Activation::Tanh, Activation::Linear).unwrap();
        let y = p.forward(array![0.3, -2.0, 5.0].view()).unwrap();
        assert_eq!(y, array![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let mut p = MlpParams::zeros(&[3, 3], Activation::Tanh, Activation::Linear).unwrap();
        p.weights[0] = Array2::eye(3);
        let x = array![0.5, -4.0, 9.0];
        assert_eq!(p.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn forward_matches_naive_loops() {
        let mut rng = rng::stream(5, 99, 0);
        for sizes in [vec![3, 5, 2], vec![4, 8, 8, 3], vec![1, 1]] {
            let p = mlp_init_with(&sizes, Activation::Tanh, Activation::Linear, &mut rng).unwrap();
            for _ in 0..5 {
                let x = random_vec(sizes[0], &mut rng);
                let got = p.forward(x.view()).unwrap();
                let want = naive_forward(&p, &x);
                for (g, w) in got.iter().zip(want.iter()) {
                    assert!((g - w).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn batch_forward_matches_vector_forward() {
        let mut rng = rng::stream(6, 99, 0);
        let p = mlp_init_with(&[3, 6, 2], Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let xs = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let tape = p.forward_batch(xs.view()).unwrap();
        for j in 0..4 {
            let y = p.forward(xs.column(j)).unwrap();
            for i in 0..2 {
                assert!((tape.output()[[i, j]] - y[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn forward_shape_error() {
        let p = MlpParams::zeros(&[3, 2], Activation::Tanh, Activation::Linear).unwrap();
        assert!(matches!(p.forward(array![1.0].view()), Err(Error::Shape(_))));
        assert!(matches!(
            mlp_backward(&p, array![1.0, 2.0, 3.0].view(), array![1.0].view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let p = mlp_init(&[3, 5, 2], Activation::Tanh, Activation::Linear, 3).unwrap();
        let g = mlp_backward(&p, array![0.1, 0.2, 0.3].view(), array![0.0, 0.0].view()).unwrap();
        assert!(g.param_slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(g.input.as_ref().unwrap().iter().all(|&v| v == 0.0));
        assert!(g.mirrors(&p));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let p = mlp_init(&[3, 2], Activation::Tanh, Activation::Linear, 3).unwrap();
        let x = array![0.5, -1.0, 2.0];
        let up = array![3.0, -0.25];
        let g = mlp_backward(&p, x.view(), up.view()).unwrap();
        let outer = naive_matmul(up.view().insert_axis(Axis(1)), x.view().insert_axis(Axis(0)));
        assert_eq!(g.weights[0], outer);
        assert_eq!(g.biases[0], up);
    }

    fn fd_check(sizes: &[usize], seed: u64) {
        let mut rng = rng::stream(seed, 98, 0);
        let p = mlp_init_with(sizes, Activation::Tanh, Activation::Linear, &mut rng).unwrap();
        let x = random_vec(sizes[0], &mut rng);
        let up = random_vec(*sizes.last().unwrap(), &mut rng);
        let g = mlp_backward(&p, x.view(), up.view()).unwrap();
        let h = 1e-6;
        let objective = |q: &MlpParams, x: &Array1<f64>| q.forward(x.view()).unwrap().dot(&up);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
        for (slot, grad_slice) in g.param_slices().iter().enumerate() {
            for k in 0..grad_slice.len() {
                let mut plus = p.clone();
                plus.param_slices_mut()[slot][k] += h;
                let mut minus = p.clone();
                minus.param_slices_mut()[slot][k] -= h;
                let fd = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * h);
                assert!(rel(fd, grad_slice[k]) < 1e-5, "slot {slot} entry {k}: fd {fd} vs {}", grad_slice[k]);
            }
        }
        let gi = g.input.unwrap();
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let fd = (objective(&p, &xp) - objective(&p, &xm)) / (2.0 * h);
            assert!(rel(fd, gi[k]) < 1e-5);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        fd_check(&[3, 5, 2], 1);
        fd_check(&[2, 4, 4, 3], 2);
        fd_check(&[4, 1], 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn gradient_agrees_with_central_differences(seed in any::<u64>(), hidden in 1usize..6) {
                fd_check(&[3, hidden, 2], seed);
            }

            #[test]
            fn forward_is_deterministic(seed in any::<u64>()) {
                let p = mlp_init(&[2, 6, 3], Activation::Tanh, Activation::Linear, seed).unwrap();
                let x = array![0.25, -0.75];
                prop_assert_eq!(p.forward(x.view()).unwrap(), p.forward(x.view()).unwrap());
            }
        }
    }
}
