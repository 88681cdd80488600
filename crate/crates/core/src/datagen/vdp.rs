use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise_snr_with, simulate_rk4, vdp_derivative, Dataset, Role, Splits, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Autonomous Van der Pol benchmark: full-state measurements of trajectories
/// started from `x0 ~ U(-x0_bound, x0_bound)^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VdpConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub length: usize,
    pub mu: f64,
    pub dt: f64,
    pub x0_bound: f64,
    /// Per-channel SNR for training and validation data; test data stay noiseless.
    pub snr_db: Option<f64>,
}

impl Default for VdpConfig {
    fn default() -> Self {
        VdpConfig { n_train: 80, n_val: 20, n_test: 10, length: 501, mu: 1.0, dt: 0.05, x0_bound: 2.0, snr_db: Some(20.0) }
    }
}

fn vdp_trajectory(cfg: &VdpConfig, seed: u64, dom: u32, index: usize, noisy: bool) -> Result<Trajectory> {
    let mut rng = rng::stream(seed, dom, index as u32);
    let x0 = [rng.random_range(-cfg.x0_bound..=cfg.x0_bound), rng.random_range(-cfg.x0_bound..=cfg.x0_bound)];
    let mu = cfg.mu;
    let states = simulate_rk4(|x: &[f64], _: &[f64]| vdp_derivative(x, mu).to_vec(), &x0, None, cfg.length, cfg.dt, 1)?;
    let clean = Trajectory::new(Some(states.clone()), None, states, cfg.dt)?;
    match (noisy, cfg.snr_db) {
        (true, Some(snr)) => add_noise_snr_with(&clean, snr, &mut rng),
        _ => Ok(clean),
    }
}

pub fn generate_vdp_dataset(cfg: &VdpConfig, seed: u64) -> Result<Splits> {
    if cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0 || cfg.length < 2 {
        return Err(Error::Config(format!(
            "Van der Pol generator needs positive counts and length >= 2, got {}/{}/{} x {}",
            cfg.n_train, cfg.n_val, cfg.n_test, cfg.length
        )));
    }
    let build = |role: Role, dom: u32, count: usize, noisy: bool| -> Result<Dataset> {
        let trajs = (0..count)
            .into_par_iter()
            .map(|i| vdp_trajectory(cfg, seed, dom, i, noisy))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(role, trajs)
    };
    Ok(Splits {
        train: build(Role::Train, domain::VDP_TRAIN, cfg.n_train, true)?,
        validation: build(Role::Validation, domain::VDP_VALIDATION, cfg.n_val, true)?,
        test: build(Role::Test, domain::VDP_TEST, cfg.n_test, false)?,
        arrowhead: None,
    })
}
