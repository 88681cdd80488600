use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, batch_gradient_with, enumerate_sections, AdamConfig, AdamState};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::KoopmanModel;
use crate::rng::{self, domain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Prediction horizon T (steps after the encoded sample).
    pub horizon: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Threads for per-section work; results do not depend on it.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            horizon: 49,
            batch_size: 256,
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            seed: 0,
            shuffle: true,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { alpha: self.alpha, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.batch_size == 0 {
            return Err(Error::Config("horizon and batch_size must be at least 1".into()));
        }
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.alpha > 0.0) || !unit(self.beta1) || !unit(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "invalid Adam settings alpha={} beta1={} beta2={} epsilon={}",
                self.alpha, self.beta1, self.beta2, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_nrms: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch (`train_loss[e-1]` for epoch `e`).
    pub train_loss: Vec<f64>,
    /// Validation NRMS; index 0 is the initial model, index `e` after epoch `e`.
    pub val_nrms: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_nrms: f64,
    #[serde(skip)]
    pub best_model: KoopmanModel,
    #[serde(skip)]
    pub final_model: KoopmanModel,
}

/// Open-loop simulation NRMS on `ds`; diverged simulations score `+inf`.
pub fn validation_score(model: &KoopmanModel, ds: &Dataset) -> Result<f64> {
    let score = metrics::nrms(model, ds)?.nrms;
    Ok(if score.is_finite() { score } else { f64::INFINITY })
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch Adam on the section loss and
/// keeps the parameters with the lowest validation score seen (the initial
/// model included). `on_epoch` sees each epoch's record as it completes.
pub fn train(
    model: KoopmanModel,
    train_ds: &Dataset,
    val_ds: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    let sections = enumerate_sections(train_ds, &model, cfg.horizon)?;
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?,
        )
    } else {
        None
    };
    let adam = cfg.adam();
    let mut state = AdamState::for_model(&model);
    let initial = validation_score(&model, val_ds)?;
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_nrms: vec![initial],
        best_epoch: 0,
        best_val_nrms: initial,
        best_model: model.clone(),
        final_model: model.clone(),
    };
    let mut model = model;
    let mut order = sections;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut rng::stream(cfg.seed, domain::SHUFFLE, epoch as u32));
        }
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = batch_gradient_with(&model, train_ds, batch, cfg.horizon, pool.as_ref())?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}, batch {b}")));
            }
            adam_step(&mut state, &mut model, &grad, &adam)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {b}: {e}")))?;
            loss_sum += loss;
            n_batches += 1;
        }
        let val = validation_score(&model, val_ds)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_nrms: val,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        report.train_loss.push(record.train_loss);
        report.val_nrms.push(val);
        if val < report.best_val_nrms {
            report.best_val_nrms = val;
            report.best_epoch = epoch;
            report.best_model = model.clone();
        }
        on_epoch(&record);
    }
    report.final_model = model;
    Ok(report)
}
