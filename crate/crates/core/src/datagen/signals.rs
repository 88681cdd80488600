use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Random-phase multisine with flat amplitude on the frequency lines of a
/// period of `len` samples that fall in `[f_min, f_max]` (cycles per sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultisineSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub rms: f64,
}

/// Low-pass filtered Gaussian noise whose amplitude grows linearly from zero to
/// `peak_std` (standard deviation reached at the last sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrowheadSpec {
    /// Cutoff in cycles per sample, below 0.5.
    pub cutoff: f64,
    pub peak_std: f64,
}

pub fn multisine(len: usize, spec: &MultisineSpec, rng: &mut Rng) -> Result<Vec<f64>> {
    let lo = ((spec.f_min * len as f64).ceil() as usize).max(1);
    let hi = ((spec.f_max * len as f64).floor() as usize).min(len.saturating_sub(1) / 2);
    if len == 0 || hi < lo {
        return Err(Error::Config(format!(
            "multisine band [{}, {}] holds no frequency line for period {len}",
            spec.f_min, spec.f_max
        )));
    }
    let phases: Vec<f64> = (lo..=hi).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut u: Vec<f64> = (0..len)
        .map(|t| {
            (lo..=hi)
                .zip(&phases)
                .map(|(k, ph)| (2.0 * PI * k as f64 * t as f64 / len as f64 + ph).cos())
                .sum()
        })
        .collect();
    let rms = (u.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    u.iter_mut().for_each(|v| *v *= spec.rms / rms);
    Ok(u)
}

/// Second-order Butterworth low-pass (bilinear transform) applied in place.
fn lowpass(signal: &mut [f64], cutoff: f64) {
    let w0 = 2.0 * PI * cutoff;
    let alpha = w0.sin() / std::f64::consts::SQRT_2;
    let cos = w0.cos();
    let a0 = 1.0 + alpha;
    let b0 = (1.0 - cos) / 2.0 / a0;
    let b1 = (1.0 - cos) / a0;
    let a1 = -2.0 * cos / a0;
    let a2 = (1.0 - alpha) / a0;
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in signal.iter_mut() {
        let x = *v;
        let y = b0 * x + b1 * x1 + b0 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

pub fn arrowhead(len: usize, spec: &ArrowheadSpec, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(spec.cutoff > 0.0 && spec.cutoff < 0.5) {
        return Err(Error::Config(format!("arrowhead cutoff must lie in (0, 0.5), got {}", spec.cutoff)));
    }
    if len < 2 {
        return Err(Error::Config("arrowhead signal needs at least two samples".into()));
    }
    let mut u: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    lowpass(&mut u, spec.cutoff);
    let std = (u.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    for (t, v) in u.iter_mut().enumerate() {
        *v *= spec.peak_std / std * (t as f64 / (len - 1) as f64);
    }
    Ok(u)
}
