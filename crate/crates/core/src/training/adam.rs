use serde::{Deserialize, Serialize};

use super::ModelGrad;
use crate::error::{Error, Result};
use crate::model::KoopmanModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// Moment estimates over the flattened parameter vector (canonical model order).
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn for_model(model: &KoopmanModel) -> Self {
        Self::new(model.n_params())
    }
}

/// One bias-corrected Adam update of a flat parameter vector.
pub fn adam_update(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "Adam: {} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient entry {i}")));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

pub fn adam_step(state: &mut AdamState, model: &mut KoopmanModel, grad: &ModelGrad, cfg: &AdamConfig) -> Result<()> {
    let mut flat = model.params_to_vec();
    adam_update(state, &mut flat, &grad.to_vec(), cfg)?;
    model.set_params_from(&flat)
}
