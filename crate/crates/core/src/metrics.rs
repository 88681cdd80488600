//! Simulation error measures.
//!
//! Each section is encoded once at its earliest valid sample and simulated
//! open-loop to its end. Per section the RMS of the residual 2-norm is taken
//! over samples `k0..=M` (1-based); the aggregate RMS is the mean over
//! sections, and NRMS divides it by the standard deviation of the outputs.
//! Multichannel data are scored per channel and the channel values averaged.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::datagen::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Excitation, KoopmanModel};

/// `sqrt(1/(M-k0+1) * sum_{k=k0}^{M} |y_hat[k] - y[k]|^2)` with 1-based `k0`
/// and `M` the number of rows.
pub fn section_rms(y_hat: ArrayView2<f64>, y: ArrayView2<f64>, k0: usize) -> Result<f64> {
    if y_hat.dim() != y.dim() {
        return Err(Error::Shape(format!("prediction {:?} and measurement {:?} differ", y_hat.dim(), y.dim())));
    }
    let m = y.nrows();
    if k0 == 0 || k0 > m {
        return Err(Error::Usage(format!("k0 must lie in 1..={m}, got {k0}")));
    }
    let diff = &y_hat.slice(s![k0 - 1.., ..]) - &y.slice(s![k0 - 1.., ..]);
    Ok((diff.iter().map(|v| v * v).sum::<f64>() / (m - k0 + 1) as f64).sqrt())
}

/// Open-loop prediction of one section.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionSim {
    /// 0-based sample index of the first prediction.
    pub start: usize,
    /// Predictions for samples `start..len`, one row each.
    pub y_hat: Array2<f64>,
}

/// Encodes at the model's burn-in index and simulates to the end of `traj`.
pub fn simulate_section(model: &KoopmanModel, traj: &Trajectory) -> Result<SectionSim> {
    let start = model.burn_in();
    if traj.len() <= start {
        return Err(Error::Eval(format!(
            "section of {} samples is too short for an encoder needing {start} past samples",
            traj.len()
        )));
    }
    let z0 = model.encode_at(traj, start)?;
    let steps = traj.len() - 1 - start;
    let excitation = match &traj.inputs {
        Some(u) => Excitation::Forced(u.slice(s![start..start + steps, ..])),
        None => Excitation::Autonomous { steps },
    };
    Ok(SectionSim { start, y_hat: model.simulate(&z0, excitation)? })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// 1-based index of the first scored sample in every section.
    pub k0: usize,
    /// Scored sample range `[start, end)` when a mask was applied.
    pub mask: Option<(usize, usize)>,
    /// Per-section RMS of the residual 2-norm.
    pub section_rms: Vec<f64>,
    pub channel_rms: Vec<f64>,
    pub sigma_y: Vec<f64>,
    pub channel_nrms: Vec<f64>,
    /// Mean of `channel_rms`.
    pub rms: f64,
    /// Mean of `channel_nrms`.
    pub nrms: f64,
    #[serde(skip)]
    pub simulations: Vec<SectionSim>,
}

impl EvalReport {
    /// Residual `y_hat - y` for the scored samples of section `i`.
    pub fn residuals(&self, ds: &Dataset, i: usize) -> Array2<f64> {
        let sim = &self.simulations[i];
        let y = &ds.trajectories[i].outputs;
        &sim.y_hat - &y.slice(s![sim.start.., ..])
    }
}

pub fn nrms(model: &KoopmanModel, ds: &Dataset) -> Result<EvalReport> {
    evaluate(model, ds, None)
}

/// Like [`nrms`], restricted to 0-based sample indices in `mask` (both the
/// scored residuals and the output standard deviation).
pub fn evaluate(model: &KoopmanModel, ds: &Dataset, mask: Option<Range<usize>>) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Eval("empty dataset".into()));
    }
    let n_y = ds.n_y();
    let window = mask.clone().unwrap_or(0..usize::MAX);
    let mut section_rms_values = Vec::with_capacity(ds.len());
    let mut channel_sum = vec![0.0; n_y];
    let mut simulations = Vec::with_capacity(ds.len());
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); n_y];
    let mut k0 = 0;
    for (i, traj) in ds.trajectories.iter().enumerate() {
        let sim = simulate_section(model, traj)?;
        k0 = sim.start + 1;
        let lo = sim.start.max(window.start);
        let hi = traj.len().min(window.end);
        if lo >= hi {
            return Err(Error::Eval(format!("section {i}: no samples left to score in [{lo}, {hi})")));
        }
        let pred = sim.y_hat.slice(s![lo - sim.start..hi - sim.start, ..]);
        let meas = traj.outputs.slice(s![lo..hi, ..]);
        section_rms_values.push(section_rms(pred, meas, 1)?);
        for c in 0..n_y {
            let ms = pred
                .column(c)
                .iter()
                .zip(meas.column(c))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / (hi - lo) as f64;
            channel_sum[c] += ms.sqrt();
        }
        let seen = traj.outputs.slice(s![window.start.min(traj.len())..hi, ..]);
        for (c, col) in seen.axis_iter(Axis(1)).enumerate() {
            pooled[c].extend(col.iter());
        }
        simulations.push(sim);
    }
    let n = ds.len() as f64;
    let channel_rms: Vec<f64> = channel_sum.iter().map(|s| s / n).collect();
    let sigma_y: Vec<f64> = pooled
        .iter()
        .map(|v| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64).sqrt()
        })
        .collect();
    if let Some(c) = sigma_y.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Eval(format!("output channel {c} has zero standard deviation")));
    }
    let channel_nrms: Vec<f64> = channel_rms.iter().zip(&sigma_y).map(|(r, s)| r / s).collect();
    Ok(EvalReport {
        k0,
        mask: mask.map(|m| (m.start, m.end)),
        section_rms: section_rms_values,
        rms: channel_rms.iter().sum::<f64>() / n_y as f64,
        nrms: channel_nrms.iter().sum::<f64>() / n_y as f64,
        channel_rms,
        sigma_y,
        channel_nrms,
        simulations,
    })
}
