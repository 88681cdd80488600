use ndarray::Axis;
use rand_distr::{Distribution, Normal};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::rng::{self, domain, Rng};

/// Adds white Gaussian noise to every output channel so that the ratio of the
/// channel's empirical (population) variance to the noise variance is
/// `10^(snr_db / 10)`.
pub fn add_noise_snr(traj: &Trajectory, snr_db: f64, seed: u64) -> Result<Trajectory> {
    add_noise_snr_with(traj, snr_db, &mut rng::stream(seed, domain::NOISE, 0))
}

pub fn add_noise_snr_with(traj: &Trajectory, snr_db: f64, rng: &mut Rng) -> Result<Trajectory> {
    if !snr_db.is_finite() {
        return Err(Error::Usage(format!("SNR must be finite, got {snr_db} dB; skip noise injection instead")));
    }
    let ratio = 10f64.powf(snr_db / 10.0);
    let mut out = traj.clone();
    for (c, mut channel) in out.outputs.axis_iter_mut(Axis(1)).enumerate() {
        let var = channel.var(0.0);
        if !(var > 0.0) {
            return Err(Error::Generation(format!("output channel {c} has zero variance; SNR is undefined")));
        }
        let normal = Normal::new(0.0, (var / ratio).sqrt()).expect("positive std");
        channel.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(out)
}
