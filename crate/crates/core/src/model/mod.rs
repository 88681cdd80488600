//! Lifted input-affine model
//!
//! ```text
//! z[k+1] = A z[k] + B(z[k]) u[k]
//! y[k]   = C z[k]
//! ```
//!
//! with the initial lifted state produced by an encoder network from either the
//! previous full state (and input) or a window of past outputs and inputs.

mod persist;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::datagen::Trajectory;
use crate::error::{shape_err, Error, Result};
use crate::numcore::{init_bound, mlp_init_with, uniform_matrix, Activation, MlpParams};
use crate::rng::{self, domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderMode {
    /// Encoder reads the previous measured state (and input).
    FullState { n_x: usize },
    /// Encoder reads `n_a` past outputs and `n_b` past inputs.
    IoHistory { n_a: usize, n_b: usize },
}

/// The state-dependent input gain `B(z)`.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMap {
    /// Network `n_z -> n_z * n_u`, output reshaped row-major into `n_z x n_u`.
    Network(MlpParams),
    /// State-independent `n_z x n_u` matrix (linear-input baseline).
    Constant(Array2<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputMapSpec {
    Network { hidden: Vec<usize> },
    Constant,
}

impl Default for InputMapSpec {
    fn default() -> Self {
        InputMapSpec::Network { hidden: vec![40] }
    }
}

/// Dimensions and architecture used by [`KoopmanModel::init`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub mode: EncoderMode,
    pub n_z: usize,
    #[serde(default)]
    pub n_u: usize,
    pub n_y: usize,
    pub encoder_hidden: Vec<usize>,
    #[serde(default)]
    pub input_map: InputMapSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedState {
    pub z: Array1<f64>,
}

impl From<Array1<f64>> for LiftedState {
    fn from(z: Array1<f64>) -> Self {
        LiftedState { z }
    }
}

/// Input sequence for [`KoopmanModel::simulate`].
#[derive(Clone, Copy, Debug)]
pub enum Excitation<'a> {
    Autonomous { steps: usize },
    /// One row per step.
    Forced(ArrayView2<'a, f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KoopmanModel {
    pub a: Array2<f64>,
    pub c: Array2<f64>,
    /// `None` exactly when `n_u == 0`.
    pub input_map: Option<InputMap>,
    pub encoder: MlpParams,
    pub mode: EncoderMode,
    pub n_z: usize,
    pub n_u: usize,
    pub n_y: usize,
}

pub fn encoder_width(mode: EncoderMode, n_u: usize, n_y: usize) -> usize {
    match mode {
        EncoderMode::FullState { n_x } => n_x + n_u,
        EncoderMode::IoHistory { n_a, n_b } => n_a * n_y + n_b * n_u,
    }
}

impl KoopmanModel {
    /// Builds a model with network parameters and `C` drawn from `U(-b, b)`,
    /// `b = n_in^(-1/4)`, `n_in = n_z` for `C`. `A` uses the tighter bound
    /// `n_z^(-1/2)`, which keeps its spectral radius near `1/sqrt(3)` for any
    /// `n_z`; the wider bound gives a radius above one and long rollouts
    /// overflow before training starts. Draw order: A, C, input map, encoder.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let ModelSpec { mode, n_z, n_u, n_y, .. } = *spec;
        if n_z == 0 || n_y == 0 {
            return Err(Error::Config(format!("n_z and n_y must be positive, got n_z={n_z}, n_y={n_y}")));
        }
        match mode {
            EncoderMode::FullState { n_x } if n_x != n_y => {
                return Err(Error::Config(format!(
                    "full-state mode measures the state directly: n_x ({n_x}) must equal n_y ({n_y})"
                )))
            }
            EncoderMode::IoHistory { n_a, n_b } if n_a == 0 && n_b == 0 => {
                return Err(Error::Config("io-history encoder needs n_a > 0 or n_b > 0".into()))
            }
            EncoderMode::IoHistory { n_b, .. } if n_u == 0 && n_b > 0 => {
                return Err(Error::Config("n_b > 0 requires an input (n_u > 0)".into()))
            }
            _ => {}
        }
        let mut rng = rng::stream(seed, domain::MODEL_INIT, 0);
        let bound = init_bound(n_z);
        let a = uniform_matrix(n_z, n_z, 1.0 / (n_z as f64).sqrt(), &mut rng);
        let c = uniform_matrix(n_y, n_z, bound, &mut rng);
        let input_map = if n_u == 0 {
            None
        } else {
            Some(match &spec.input_map {
                InputMapSpec::Network { hidden } => {
                    let sizes: Vec<usize> = std::iter::once(n_z).chain(hidden.iter().copied()).chain([n_z * n_u]).collect();
                    InputMap::Network(mlp_init_with(&sizes, Activation::Tanh, Activation::Linear, &mut rng)?)
                }
                InputMapSpec::Constant => InputMap::Constant(uniform_matrix(n_z, n_u, bound, &mut rng)),
            })
        };
        let sizes: Vec<usize> = std::iter::once(encoder_width(mode, n_u, n_y))
            .chain(spec.encoder_hidden.iter().copied())
            .chain([n_z])
            .collect();
        let encoder = mlp_init_with(&sizes, Activation::Tanh, Activation::Linear, &mut rng)?;
        let model = KoopmanModel { a, c, input_map, encoder, mode, n_z, n_u, n_y };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n_z = self.n_z;
        if self.a.dim() != (n_z, n_z) {
            return Err(Error::Shape(format!("A must be {n_z}x{n_z}, got {:?}", self.a.dim())));
        }
        if self.c.dim() != (self.n_y, n_z) {
            return Err(Error::Shape(format!("C must be {}x{n_z}, got {:?}", self.n_y, self.c.dim())));
        }
        self.encoder.validate()?;
        let width = encoder_width(self.mode, self.n_u, self.n_y);
        if self.encoder.input_width() != width || self.encoder.output_width() != n_z {
            return Err(Error::Shape(format!(
                "encoder must map {width} -> {n_z}, got {} -> {}",
                self.encoder.input_width(),
                self.encoder.output_width()
            )));
        }
        match (&self.input_map, self.n_u) {
            (None, 0) => {}
            (Some(InputMap::Network(net)), n_u) if n_u > 0 => {
                net.validate()?;
                if net.input_width() != n_z || net.output_width() != n_z * n_u {
                    return Err(Error::Shape(format!(
                        "input-map network must map {n_z} -> {}, got {} -> {}",
                        n_z * n_u,
                        net.input_width(),
                        net.output_width()
                    )));
                }
            }
            (Some(InputMap::Constant(b)), n_u) if n_u > 0 => {
                if b.dim() != (n_z, n_u) {
                    return Err(Error::Shape(format!("constant B must be {n_z}x{n_u}, got {:?}", b.dim())));
                }
            }
            _ => return Err(Error::Shape(format!("input map presence does not match n_u = {}", self.n_u))),
        }
        if self.param_slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn encoder_width(&self) -> usize {
        encoder_width(self.mode, self.n_u, self.n_y)
    }

    /// Earliest sample index at which the encoder has all of its inputs.
    pub fn burn_in(&self) -> usize {
        match self.mode {
            EncoderMode::FullState { .. } => 1,
            EncoderMode::IoHistory { n_a, n_b } => n_a.max(n_b),
        }
    }

    /// Writes the encoder input for a section starting at sample `k` of `traj`.
    /// Full state: `(y[k-1], u[k-1])`. History: `y[k-n_a..k]` oldest first, then `u[k-n_b..k]`.
    pub fn fill_encoder_input(&self, traj: &Trajectory, k: usize, mut out: ArrayViewMut1<f64>) -> Result<()> {
        if k < self.burn_in() || k > traj.len() {
            return Err(Error::Usage(format!(
                "encoder needs samples before index {k}; valid start indices are {}..={}",
                self.burn_in(),
                traj.len()
            )));
        }
        if traj.n_y() != self.n_y || traj.n_u() != self.n_u {
            return Err(Error::Shape(format!(
                "model expects (n_u={}, n_y={}), data has (n_u={}, n_y={})",
                self.n_u,
                self.n_y,
                traj.n_u(),
                traj.n_y()
            )));
        }
        let (n_a, n_b) = match self.mode {
            EncoderMode::FullState { .. } => (1, 1),
            EncoderMode::IoHistory { n_a, n_b } => (n_a, n_b),
        };
        let mut pos = 0;
        for row in traj.outputs.slice(s![k - n_a..k, ..]).rows() {
            out.slice_mut(s![pos..pos + self.n_y]).assign(&row);
            pos += self.n_y;
        }
        if let Some(u) = &traj.inputs {
            for row in u.slice(s![k - n_b..k, ..]).rows() {
                out.slice_mut(s![pos..pos + self.n_u]).assign(&row);
                pos += self.n_u;
            }
        }
        debug_assert_eq!(pos, out.len());
        Ok(())
    }

    pub fn encoder_input_at(&self, traj: &Trajectory, k: usize) -> Result<Array1<f64>> {
        let mut v = Array1::zeros(self.encoder_width());
        self.fill_encoder_input(traj, k, v.view_mut())?;
        Ok(v)
    }

    pub fn encode_at(&self, traj: &Trajectory, k: usize) -> Result<LiftedState> {
        Ok(self.encoder.forward(self.encoder_input_at(traj, k)?.view())?.into())
    }

    /// `z = e(x_prev, u_prev)`; `u_prev` is omitted for autonomous models.
    pub fn encode_full_state(&self, x_prev: ArrayView1<f64>, u_prev: Option<ArrayView1<f64>>) -> Result<LiftedState> {
        let EncoderMode::FullState { n_x } = self.mode else {
            return Err(Error::Usage("encode_full_state called on an io-history model".into()));
        };
        if x_prev.len() != n_x {
            return Err(shape_err("previous state", n_x, x_prev.len()));
        }
        let mut input = x_prev.to_vec();
        match (u_prev, self.n_u) {
            (None, 0) => {}
            (Some(u), n_u) if u.len() == n_u && n_u > 0 => input.extend(u.iter()),
            (u, n_u) => return Err(shape_err("previous input", n_u, u.map_or(0, |u| u.len()))),
        }
        Ok(self.encoder.forward(Array1::from(input).view())?.into())
    }

    /// `y_hist` is `n_a x n_y` and `u_hist` is `n_b x n_u`, oldest row first.
    pub fn encode_io_history(&self, y_hist: ArrayView2<f64>, u_hist: ArrayView2<f64>) -> Result<LiftedState> {
        let EncoderMode::IoHistory { n_a, n_b } = self.mode else {
            return Err(Error::Usage("encode_io_history called on a full-state model".into()));
        };
        if y_hist.dim() != (n_a, self.n_y) || u_hist.dim() != (n_b, self.n_u) {
            return Err(Error::Usage(format!(
                "history windows must be {n_a}x{} outputs and {n_b}x{} inputs, got {:?} and {:?}",
                self.n_y,
                self.n_u,
                y_hist.dim(),
                u_hist.dim()
            )));
        }
        let input: Array1<f64> = y_hist.iter().chain(u_hist.iter()).copied().collect();
        Ok(self.encoder.forward(input.view())?.into())
    }

    /// `B(z)` as an `n_z x n_u` matrix.
    pub fn input_matrix(&self, z: &LiftedState) -> Result<Array2<f64>> {
        self.check_z(z)?;
        match &self.input_map {
            None => Err(Error::Usage("autonomous model has no input matrix".into())),
            Some(InputMap::Constant(b)) => Ok(b.clone()),
            Some(InputMap::Network(net)) => {
                let flat = net.forward(z.z.view())?;
                Ok(flat.into_shape_with_order((self.n_z, self.n_u)).expect("validated width"))
            }
        }
    }

    fn check_z(&self, z: &LiftedState) -> Result<()> {
        if z.z.len() != self.n_z {
            return Err(shape_err("lifted state", self.n_z, z.z.len()));
        }
        Ok(())
    }

    pub fn step(&self, z: &LiftedState, u: Option<ArrayView1<f64>>) -> Result<LiftedState> {
        self.check_z(z)?;
        let mut next = self.a.dot(&z.z);
        match (u, self.n_u) {
            (None, 0) => {}
            (Some(u), n_u) if u.len() == n_u && n_u > 0 => {
                next += &self.input_matrix(z)?.dot(&u);
            }
            (u, n_u) => return Err(shape_err("input", n_u, u.map_or(0, |u| u.len()))),
        }
        Ok(next.into())
    }

    pub fn output(&self, z: &LiftedState) -> Result<Array1<f64>> {
        self.check_z(z)?;
        Ok(self.c.dot(&z.z))
    }

    /// Open-loop outputs `y[0..=T]` from `z0`, one row per sample.
    pub fn simulate(&self, z0: &LiftedState, excitation: Excitation<'_>) -> Result<Array2<f64>> {
        let steps = match excitation {
            Excitation::Autonomous { steps } => {
                if self.n_u > 0 {
                    return Err(Error::Usage("forced model needs an input sequence".into()));
                }
                steps
            }
            Excitation::Forced(u) => {
                if u.ncols() != self.n_u || self.n_u == 0 {
                    return Err(Error::Shape(format!("input sequence has {} columns, model has n_u = {}", u.ncols(), self.n_u)));
                }
                u.nrows()
            }
        };
        let mut out = Array2::zeros((steps + 1, self.n_y));
        let mut z = z0.clone();
        out.row_mut(0).assign(&self.output(&z)?);
        for p in 0..steps {
            let u = match &excitation {
                Excitation::Forced(u) => Some(u.row(p)),
                Excitation::Autonomous { .. } => None,
            };
            z = self.step(&z, u)?;
            out.row_mut(p + 1).assign(&self.output(&z)?);
        }
        Ok(out)
    }

    pub fn n_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Parameter storage in canonical order: A, C, input map, encoder.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.a.as_slice().expect("standard layout"), self.c.as_slice().expect("standard layout")];
        match &self.input_map {
            Some(InputMap::Network(net)) => out.extend(net.param_slices()),
            Some(InputMap::Constant(b)) => out.push(b.as_slice().expect("standard layout")),
            None => {}
        }
        out.extend(self.encoder.param_slices());
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.a.as_slice_mut().expect("standard layout"), self.c.as_slice_mut().expect("standard layout")];
        match &mut self.input_map {
            Some(InputMap::Network(net)) => out.extend(net.param_slices_mut()),
            Some(InputMap::Constant(b)) => out.push(b.as_slice_mut().expect("standard layout")),
            None => {}
        }
        out.extend(self.encoder.param_slices_mut());
        out
    }

    pub fn params_to_vec(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_params_from(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(shape_err("flat parameter vector", self.n_params(), flat.len()));
        }
        let mut pos = 0;
        for slot in self.param_slices_mut() {
            let n = slot.len();
            slot.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        Ok(())
    }
}
