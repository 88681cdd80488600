//! Section rollouts batched column-wise.
//!
//! A chunk of `nb` sections is processed together: lifted states for
//! prediction step `p` occupy columns `p*nb .. (p+1)*nb` of one `n_z x (T+1)nb`
//! matrix, so the propagation, the output map and the parameter gradients of
//! `A` and `C` are plain matrix products. Chunks have a fixed size and are
//! reduced in chunk order, so the result does not depend on the worker count.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use rayon::ThreadPool;

use super::{InputMapGrad, ModelGrad, SectionIndex};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::model::{InputMap, KoopmanModel};
use crate::numcore::MlpTape;

/// Sections per work unit. Fixed: changing it changes floating-point summation order.
pub const CHUNK_SECTIONS: usize = 32;

struct ChunkData {
    nb: usize,
    encoder_in: Array2<f64>,
    /// `n_y x (T+1)nb`
    y: Array2<f64>,
    /// `n_u x T nb`
    u: Option<Array2<f64>>,
}

fn gather(model: &KoopmanModel, ds: &Dataset, sections: &[SectionIndex], horizon: usize) -> Result<ChunkData> {
    let nb = sections.len();
    let mut encoder_in = Array2::zeros((model.encoder_width(), nb));
    let mut y = Array2::zeros((model.n_y, (horizon + 1) * nb));
    let mut u = (model.n_u > 0).then(|| Array2::zeros((model.n_u, horizon * nb)));
    for (j, idx) in sections.iter().enumerate() {
        let traj = ds
            .trajectories
            .get(idx.traj)
            .ok_or_else(|| Error::Usage(format!("section refers to trajectory {} of {}", idx.traj, ds.len())))?;
        if idx.start < model.burn_in() || idx.start + horizon >= traj.len() {
            return Err(Error::Usage(format!(
                "section start {} in trajectory {} is invalid for horizon {horizon} (length {}, burn-in {})",
                idx.start,
                idx.traj,
                traj.len(),
                model.burn_in()
            )));
        }
        model.fill_encoder_input(traj, idx.start, encoder_in.column_mut(j))?;
        for p in 0..=horizon {
            y.column_mut(p * nb + j).assign(&traj.output(idx.start + p));
        }
        if let (Some(u), Some(inputs)) = (u.as_mut(), traj.inputs.as_ref()) {
            for p in 0..horizon {
                u.column_mut(p * nb + j).assign(&inputs.row(idx.start + p));
            }
        }
    }
    Ok(ChunkData { nb, encoder_in, y, u })
}

/// Sum over the chunk of `sum_p |y_hat - y|^2`; with `grad`, accumulates its gradient.
fn chunk_objective(model: &KoopmanModel, data: &ChunkData, horizon: usize, grad: Option<&mut ModelGrad>) -> Result<f64> {
    let nb = data.nb;
    let n_u = model.n_u;
    let enc_tape = model.encoder.forward_batch(data.encoder_in.view())?;
    let mut z = Array2::zeros((model.n_z, (horizon + 1) * nb));
    z.slice_mut(s![.., 0..nb]).assign(&enc_tape.output());
    let mut b_tapes: Vec<MlpTape> = Vec::new();
    for p in 0..horizon {
        let (head, mut tail) = z.view_mut().split_at(Axis(1), (p + 1) * nb);
        let zp = head.slice(s![.., p * nb..]);
        let mut next = tail.slice_mut(s![.., 0..nb]);
        general_mat_mul(1.0, &model.a, &zp, 0.0, &mut next);
        let u = data.u.as_ref().map(|u| u.slice(s![.., p * nb..(p + 1) * nb]));
        match (&model.input_map, u) {
            (Some(InputMap::Network(net)), Some(u)) => {
                let tape = net.forward_batch(zp)?;
                let b = tape.output();
                for i in 0..model.n_z {
                    for q in 0..n_u {
                        let brow = b.row(i * n_u + q);
                        let urow = u.row(q);
                        let mut nrow = next.row_mut(i);
                        for j in 0..nb {
                            nrow[j] += brow[j] * urow[j];
                        }
                    }
                }
                b_tapes.push(tape);
            }
            (Some(InputMap::Constant(b)), Some(u)) => general_mat_mul(1.0, b, &u, 1.0, &mut next),
            _ => {}
        }
    }
    let mut resid = data.y.clone();
    general_mat_mul(1.0, &model.c, &z, -1.0, &mut resid);
    let objective = resid.iter().map(|r| r * r).sum::<f64>();
    let Some(grad) = grad else {
        return Ok(objective);
    };

    general_mat_mul(2.0, &resid, &z.t(), 1.0, &mut grad.c);
    // g holds d(objective)/dz for every step; seeded with the output-map term
    let mut g = Array2::zeros(z.raw_dim());
    general_mat_mul(2.0, &model.c.t(), &resid, 0.0, &mut g);
    for p in (0..horizon).rev() {
        let (mut head, tail) = g.view_mut().split_at(Axis(1), (p + 1) * nb);
        let g_next = tail.slice(s![.., 0..nb]);
        let mut g_p = head.slice_mut(s![.., p * nb..]);
        general_mat_mul(1.0, &model.a.t(), &g_next, 1.0, &mut g_p);
        let u = data.u.as_ref().map(|u| u.slice(s![.., p * nb..(p + 1) * nb]));
        match (&model.input_map, &mut grad.input_map, u) {
            (Some(InputMap::Network(net)), Some(InputMapGrad::Network(gnet)), Some(u)) => {
                let mut upstream = Array2::zeros((model.n_z * n_u, nb));
                for i in 0..model.n_z {
                    for q in 0..n_u {
                        let mut row = upstream.row_mut(i * n_u + q);
                        for j in 0..nb {
                            row[j] = g_next[[i, j]] * u[[q, j]];
                        }
                    }
                }
                let dz = net.backward_batch(&b_tapes[p], upstream.view(), gnet)?;
                g_p += &dz;
            }
            (Some(InputMap::Constant(_)), Some(InputMapGrad::Constant(gb)), Some(u)) => {
                general_mat_mul(1.0, &g_next, &u.t(), 1.0, gb);
            }
            _ => {}
        }
    }
    if horizon > 0 {
        general_mat_mul(
            1.0,
            &g.slice(s![.., nb..]),
            &z.slice(s![.., ..horizon * nb]).t(),
            1.0,
            &mut grad.a,
        );
    }
    model.encoder.backward_batch(&enc_tape, g.slice(s![.., 0..nb]), &mut grad.encoder)?;
    Ok(objective)
}

fn check_batch(batch: &[SectionIndex]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    Ok(())
}

fn run_chunks<T, F>(batch: &[SectionIndex], pool: Option<&ThreadPool>, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[SectionIndex]) -> Result<T> + Sync,
{
    let chunks: Vec<&[SectionIndex]> = batch.chunks(CHUNK_SECTIONS).collect();
    match pool {
        Some(pool) => pool.install(|| chunks.par_iter().map(|c| work(c)).collect()),
        None => chunks.iter().map(|c| work(c)).collect(),
    }
}

/// `1/(T+1) * sum_{p=0}^{T} |y_hat[k+p] - y[k+p]|^2` for one section.
pub fn section_loss(model: &KoopmanModel, ds: &Dataset, idx: SectionIndex, horizon: usize) -> Result<f64> {
    let data = gather(model, ds, &[idx], horizon)?;
    Ok(chunk_objective(model, &data, horizon, None)? / (horizon + 1) as f64)
}

/// `1/(2 |B| (T+1)) * sum_{i in B} sum_p |y_hat - y|^2`.
pub fn batch_loss(model: &KoopmanModel, ds: &Dataset, batch: &[SectionIndex], horizon: usize) -> Result<f64> {
    batch_loss_with(model, ds, batch, horizon, None)
}

pub fn batch_loss_with(
    model: &KoopmanModel,
    ds: &Dataset,
    batch: &[SectionIndex],
    horizon: usize,
    pool: Option<&ThreadPool>,
) -> Result<f64> {
    check_batch(batch)?;
    let sums = run_chunks(batch, pool, |c| chunk_objective(model, &gather(model, ds, c, horizon)?, horizon, None))?;
    Ok(sums.iter().sum::<f64>() / (2 * batch.len() * (horizon + 1)) as f64)
}

/// Batch loss and its exact gradient with respect to all model parameters.
pub fn batch_gradient(model: &KoopmanModel, ds: &Dataset, batch: &[SectionIndex], horizon: usize) -> Result<(f64, ModelGrad)> {
    batch_gradient_with(model, ds, batch, horizon, None)
}

pub fn batch_gradient_with(
    model: &KoopmanModel,
    ds: &Dataset,
    batch: &[SectionIndex],
    horizon: usize,
    pool: Option<&ThreadPool>,
) -> Result<(f64, ModelGrad)> {
    check_batch(batch)?;
    let parts = run_chunks(batch, pool, |c| {
        let mut g = ModelGrad::zeros_like(model);
        let obj = chunk_objective(model, &gather(model, ds, c, horizon)?, horizon, Some(&mut g))?;
        Ok((obj, g))
    })?;
    let mut total = 0.0;
    let mut grad = ModelGrad::zeros_like(model);
    for (obj, g) in &parts {
        total += obj;
        grad.add_assign(g);
    }
    let norm = 1.0 / (2 * batch.len() * (horizon + 1)) as f64;
    grad.scale(norm);
    Ok((total * norm, grad))
}
