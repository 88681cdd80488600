use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{add_noise_snr_with, arrowhead, multisine, simulate_rk4, ArrowheadSpec, Dataset, MultisineSpec, Role, Splits, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Forced mass-spring-damper with cubic spring:
/// `m y'' + d y' + k1 y + k3 y^3 = u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuffingParams {
    pub mass: f64,
    pub damping: f64,
    pub k1: f64,
    pub k3: f64,
}

impl Default for DuffingParams {
    fn default() -> Self {
        DuffingParams { mass: 1.0, damping: 0.5, k1: 1.0, k3: 1.0 }
    }
}

impl DuffingParams {
    pub fn derivative(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let force = u.first().copied().unwrap_or(0.0);
        vec![x[1], (force - self.damping * x[1] - self.k1 * x[0] - self.k3 * x[0].powi(3)) / self.mass]
    }
}

/// Synthetic stand-in for a Silverbox-style record set: multisine train,
/// validation and test records plus an arrowhead record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuffingConfig {
    pub params: DuffingParams,
    pub dt: f64,
    /// RK4 steps per sample interval.
    pub substeps: usize,
    /// Divergence guard on |y|.
    pub bound: f64,
    pub n_train: usize,
    pub train_len: usize,
    pub val_len: usize,
    pub test_len: usize,
    pub arrowhead_len: usize,
    pub multisine: MultisineSpec,
    pub arrowhead: ArrowheadSpec,
    /// Output SNR for train and validation records.
    pub snr_db: Option<f64>,
}

impl Default for DuffingConfig {
    fn default() -> Self {
        DuffingConfig {
            params: DuffingParams::default(),
            dt: 0.5,
            substeps: 10,
            bound: 100.0,
            n_train: 8,
            train_len: 1000,
            val_len: 500,
            test_len: 1000,
            arrowhead_len: 1000,
            multisine: MultisineSpec { f_min: 0.0, f_max: 0.15, rms: 0.7 },
            arrowhead: ArrowheadSpec { cutoff: 0.15, peak_std: 1.0 },
            snr_db: None,
        }
    }
}

/// States `(y, y')` at each sample, starting from `x0`, under zero-order-hold `u`.
pub fn simulate_duffing(params: &DuffingParams, u: &[f64], x0: [f64; 2], dt: f64, substeps: usize, bound: f64) -> Result<Array2<f64>> {
    let inputs = Array2::from_shape_vec((u.len(), 1), u.to_vec()).expect("column");
    let states = simulate_rk4(|x: &[f64], u: &[f64]| params.derivative(x, u), &x0, Some(inputs.view()), u.len(), dt, substeps)
        .map_err(|e| Error::Generation(format!("Duffing simulation failed: {e}")))?;
    if let Some(k) = states.column(0).iter().position(|y| y.abs() > bound) {
        return Err(Error::Generation(format!("Duffing response exceeded |y| <= {bound} at sample {k}")));
    }
    Ok(states)
}

fn record(states: Array2<f64>, u: Vec<f64>, dt: f64) -> Result<Trajectory> {
    let n = u.len();
    let y = states.slice(s![.., 0..1]).to_owned();
    Trajectory::new(Some(states), Some(Array2::from_shape_vec((n, 1), u).expect("column")), y, dt)
}

impl DuffingConfig {
    /// Steady-state periodic response: the multisine is applied for two periods
    /// and the second one is kept.
    fn periodic_record(&self, len: usize, rng: &mut rng::Rng) -> Result<Trajectory> {
        let u = multisine(len, &self.multisine, rng)?;
        let doubled: Vec<f64> = u.iter().chain(&u).copied().collect();
        let states = simulate_duffing(&self.params, &doubled, [0.0, 0.0], self.dt, self.substeps, self.bound)?;
        record(states.slice(s![len.., ..]).to_owned(), u, self.dt)
    }
}

pub fn generate_duffing_dataset(cfg: &DuffingConfig, seed: u64) -> Result<Splits> {
    if cfg.n_train == 0 || cfg.train_len < 2 || cfg.val_len < 2 || cfg.test_len < 2 {
        return Err(Error::Config("Duffing generator needs at least one training record and lengths >= 2".into()));
    }
    let noisy = |t: Trajectory, rng: &mut rng::Rng| match cfg.snr_db {
        Some(snr) => add_noise_snr_with(&t, snr, rng),
        None => Ok(t),
    };
    let mut train = Vec::with_capacity(cfg.n_train);
    for i in 0..cfg.n_train {
        let mut rng = rng::stream(seed, domain::DUFFING, i as u32);
        let t = cfg.periodic_record(cfg.train_len, &mut rng)?;
        train.push(noisy(t, &mut rng)?);
    }
    let mut rng = rng::stream(seed, domain::DUFFING, 1 << 20);
    let validation = noisy(cfg.periodic_record(cfg.val_len, &mut rng)?, &mut rng)?;
    let mut rng = rng::stream(seed, domain::DUFFING, (1 << 20) + 1);
    let test = cfg.periodic_record(cfg.test_len, &mut rng)?;
    let arrow = if cfg.arrowhead_len > 1 {
        let mut rng = rng::stream(seed, domain::DUFFING, (1 << 20) + 2);
        let u = arrowhead(cfg.arrowhead_len, &cfg.arrowhead, &mut rng)?;
        let states = simulate_duffing(&cfg.params, &u, [0.0, 0.0], cfg.dt, cfg.substeps, cfg.bound)?;
        Some(Dataset::new(Role::Arrowhead, vec![record(states, u, cfg.dt)?])?)
    } else {
        None
    };
    Ok(Splits {
        train: Dataset::new(Role::Train, train)?,
        validation: Dataset::new(Role::Validation, vec![validation])?,
        test: Dataset::new(Role::Test, vec![test])?,
        arrowhead: arrow,
    })
}
