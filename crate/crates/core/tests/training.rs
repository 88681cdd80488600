mod common;

use common::*;
use deepkoop_core::model::Excitation;
use deepkoop_core::training::{
    adam_step, batch_gradient, batch_gradient_with, batch_loss, enumerate_sections, section_loss, train, validation_score,
    AdamState, CHUNK_SECTIONS,
};
use deepkoop_core::{Dataset, Error, KoopmanModel, LiftedState, Role, SectionIndex, TrainConfig, Trajectory};
use ndarray::{array, s, Array2};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central differences of the batch loss over every parameter coordinate.
fn fd_gradient(model: &KoopmanModel, ds: &Dataset, batch: &[SectionIndex], horizon: usize) -> Vec<f64> {
    let h = 1e-6;
    let base = model.params_to_vec();
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params_from(&p).unwrap();
            let plus = batch_loss(&probe, ds, batch, horizon).unwrap();
            p[i] -= 2.0 * h;
            probe.set_params_from(&p).unwrap();
            let minus = batch_loss(&probe, ds, batch, horizon).unwrap();
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[test]
fn dense_sections_full_state() {
    let ds = Dataset::new(Role::Train, vec![Trajectory::new(None, None, Array2::zeros((501, 2)), 0.05).unwrap()]).unwrap();
    let m = fs_model(2, 3, 0, 0);
    let secs = enumerate_sections(&ds, &m, 149).unwrap();
    assert_eq!(secs.len(), 351);
    assert_eq!(secs.first().unwrap().start, 1);
    assert_eq!(secs.last().unwrap().start, 351);
    assert_eq!(enumerate_sections(&ds, &m, 500).unwrap_err().to_string().contains("no section"), true);
    assert_eq!(enumerate_sections(&ds, &m, 499).unwrap().len(), 1);
}

#[test]
fn dense_sections_io_history() {
    let ds = random_dataset(&[100], 1, 1, 1);
    let m = io_model(3, 1, 1, 10, 10, 0);
    let secs = enumerate_sections(&ds, &m, 49).unwrap();
    assert_eq!(secs.len(), 41);
    assert_eq!((secs[0].start, secs[40].start), (10, 50));
    let two = random_dataset(&[100, 60], 1, 1, 1);
    let secs = enumerate_sections(&two, &m, 49).unwrap();
    assert_eq!(secs.len(), 41 + 1);
    assert_eq!(secs.last().unwrap(), &SectionIndex { traj: 1, start: 10 });
}

/// Model whose rollout reproduces constant data exactly: z = x, A = I, C = I.
fn identity_model(n: usize) -> KoopmanModel {
    let mut m = fs_model(n, n, 0, 0);
    m.a = Array2::eye(n);
    m.c = Array2::eye(n);
    m.encoder.weights[0].fill(0.0);
    m.encoder.biases[0].fill(0.0);
    m.encoder.weights[1].fill(0.0);
    m.encoder.biases[1].fill(0.0);
    m
}

#[test]
fn perfect_model_has_zero_loss_and_gradient() {
    let mut m = identity_model(2);
    // encoder outputs the constant (0.5, -1) regardless of input
    m.encoder.biases[1] = array![0.5, -1.0];
    let y = Array2::from_shape_fn((20, 2), |(_, c)| if c == 0 { 0.5 } else { -1.0 });
    let ds = Dataset::new(Role::Train, vec![Trajectory::new(None, None, y, 0.1).unwrap()]).unwrap();
    let secs = enumerate_sections(&ds, &m, 5).unwrap();
    assert_eq!(section_loss(&m, &ds, secs[0], 5).unwrap(), 0.0);
    let (loss, g) = batch_gradient(&m, &ds, &secs, 5).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.to_vec().iter().all(|&v| v == 0.0));
    assert!(matches!(validation_score(&m, &ds), Err(Error::Eval(_))));
}

#[test]
fn zero_horizon_loss_is_squared_norm() {
    let mut m = identity_model(2);
    m.encoder.biases[1] = array![3.0, 4.0];
    let ds = Dataset::new(Role::Train, vec![Trajectory::new(None, None, Array2::zeros((3, 2)), 0.1).unwrap()]).unwrap();
    assert_eq!(section_loss(&m, &ds, SectionIndex { traj: 0, start: 1 }, 0).unwrap(), 25.0);
}

#[test]
fn section_loss_matches_hand_unrolled_rollout() {
    let ds = random_dataset(&[12], 1, 2, 3);
    let m = io_model(3, 1, 2, 2, 3, 5);
    let traj = &ds.trajectories[0];
    for start in [3usize, 6, 9] {
        let y_hist = traj.outputs.slice(s![start - 2..start, ..]);
        let u_hist = traj.inputs.as_ref().unwrap().slice(s![start - 3..start, ..]);
        let mut z = m.encode_io_history(y_hist, u_hist).unwrap();
        let mut want = 0.0;
        for p in 0..=2 {
            let r = m.output(&z).unwrap() - traj.output(start + p);
            want += r.dot(&r);
            z = m.step(&z, traj.input(start + p)).unwrap();
        }
        want /= 3.0;
        let got = section_loss(&m, &ds, SectionIndex { traj: 0, start }, 2).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0));
    }
}

#[test]
fn batch_loss_is_half_mean_of_section_losses() {
    let ds = random_dataset(&[40, 30], 1, 1, 4);
    let m = damped(io_model(4, 1, 1, 3, 2, 6), 0.5);
    let secs = enumerate_sections(&ds, &m, 4).unwrap();
    let l1 = section_loss(&m, &ds, secs[0], 4).unwrap();
    let l2 = section_loss(&m, &ds, secs[7], 4).unwrap();
    let pair = batch_loss(&m, &ds, &[secs[0], secs[7]], 4).unwrap();
    assert!((pair - (l1 + l2) / 4.0).abs() < 1e-12);

    // every section: V_enc over the whole data set
    let all = batch_loss(&m, &ds, &secs, 4).unwrap();
    let v_enc = secs.iter().map(|&i| section_loss(&m, &ds, i, 4).unwrap()).sum::<f64>() / (2.0 * secs.len() as f64);
    assert!((all - v_enc).abs() < 1e-12);
    assert!(matches!(batch_loss(&m, &ds, &[], 4), Err(Error::Usage(_))));
    assert!(matches!(batch_loss(&m, &ds, &[SectionIndex { traj: 0, start: 1 }], 4), Err(Error::Usage(_))));
}

#[test]
fn gradient_matches_finite_differences_tiny_models() {
    // n_z = 3, T = 2, two sections, both encoder modes
    let ds = random_dataset(&[15], 1, 1, 7);
    for m in [io_model(3, 1, 1, 2, 2, 8), fs_model(1, 3, 1, 9)] {
        let secs = enumerate_sections(&ds, &m, 2).unwrap();
        let batch = [secs[1], secs[4]];
        let (_, g) = batch_gradient(&m, &ds, &batch, 2).unwrap();
        let fd = fd_gradient(&m, &ds, &batch, 2);
        for (i, (a, b)) in g.to_vec().iter().zip(&fd).enumerate() {
            assert!(rel_err(*a, *b) < 1e-4 || (a - b).abs() < 1e-8, "coordinate {i}: {a} vs {b}");
        }
    }
}

#[test]
fn gradient_constant_input_map_and_autonomous() {
    let ds = random_dataset(&[12], 2, 2, 10);
    let mut m = io_model(3, 2, 2, 2, 1, 11);
    let spec_const = deepkoop_core::ModelSpec {
        mode: m.mode,
        n_z: 3,
        n_u: 2,
        n_y: 2,
        encoder_hidden: vec![4],
        input_map: deepkoop_core::InputMapSpec::Constant,
    };
    m = KoopmanModel::init(&spec_const, 11).unwrap();
    let secs = enumerate_sections(&ds, &m, 3).unwrap();
    let (_, g) = batch_gradient(&m, &ds, &secs[..3], 3).unwrap();
    let fd = fd_gradient(&m, &ds, &secs[..3], 3);
    for (a, b) in g.to_vec().iter().zip(&fd) {
        assert!(rel_err(*a, *b) < 1e-4 || (a - b).abs() < 1e-8);
    }

    let ds = random_dataset(&[12], 0, 2, 12);
    let m = fs_model(2, 4, 0, 13);
    let secs = enumerate_sections(&ds, &m, 3).unwrap();
    let (_, g) = batch_gradient(&m, &ds, &secs, 3).unwrap();
    let fd = fd_gradient(&m, &ds, &secs, 3);
    for (a, b) in g.to_vec().iter().zip(&fd) {
        assert!(rel_err(*a, *b) < 1e-4 || (a - b).abs() < 1e-8);
    }
}

#[test]
fn two_section_gradient_is_average_of_singles() {
    let ds = random_dataset(&[20], 1, 1, 14);
    let m = io_model(3, 1, 1, 2, 2, 15);
    let secs = enumerate_sections(&ds, &m, 3).unwrap();
    let (_, g12) = batch_gradient(&m, &ds, &[secs[2], secs[9]], 3).unwrap();
    let (_, mut g1) = batch_gradient(&m, &ds, &[secs[2]], 3).unwrap();
    let (_, g2) = batch_gradient(&m, &ds, &[secs[9]], 3).unwrap();
    g1.add_assign(&g2);
    g1.scale(0.5);
    for (a, b) in g12.to_vec().iter().zip(g1.to_vec()) {
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn gradient_is_independent_of_worker_count() {
    let ds = random_dataset(&[200, 150], 1, 1, 16);
    let m = damped(io_model(5, 1, 1, 3, 3, 17), 0.4);
    let secs = enumerate_sections(&ds, &m, 10).unwrap();
    assert!(secs.len() > 3 * CHUNK_SECTIONS);
    let serial = batch_gradient(&m, &ds, &secs, 10).unwrap();
    for workers in [2, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let par = batch_gradient_with(&m, &ds, &secs, 10, Some(&pool)).unwrap();
        assert_eq!(serial.0.to_bits(), par.0.to_bits());
        assert_eq!(serial.1, par.1);
    }
}

fn tiny_problem() -> (KoopmanModel, Dataset, Dataset) {
    let train_ds = random_dataset(&[30], 1, 1, 18);
    let mut val = random_dataset(&[25], 1, 1, 19);
    val.role = Role::Validation;
    (damped(io_model(3, 1, 1, 2, 2, 20), 0.5), train_ds, val)
}

#[test]
fn zero_epochs_returns_initial_model() {
    let (m, tr, va) = tiny_problem();
    let cfg = TrainConfig { horizon: 3, epochs: 0, ..Default::default() };
    let rep = train(m.clone(), &tr, &va, &cfg, |_| {}).unwrap();
    assert_eq!(rep.best_model, m);
    assert_eq!(rep.best_epoch, 0);
    assert_eq!(rep.val_nrms.len(), 1);
    assert!(rep.train_loss.is_empty());
}

#[test]
fn single_batch_epoch_replays_one_adam_step() {
    let (m, tr, va) = tiny_problem();
    let cfg = TrainConfig { horizon: 3, epochs: 1, batch_size: 1000, shuffle: false, alpha: 1e-2, ..Default::default() };
    let rep = train(m.clone(), &tr, &va, &cfg, |_| {}).unwrap();
    let secs = enumerate_sections(&tr, &m, 3).unwrap();
    let (loss, g) = batch_gradient(&m, &tr, &secs, 3).unwrap();
    let mut replay = m.clone();
    adam_step(&mut AdamState::for_model(&m), &mut replay, &g, &cfg.adam()).unwrap();
    assert_eq!(rep.final_model, replay);
    assert_eq!(rep.train_loss, vec![loss]);
}

#[test]
fn training_is_deterministic_and_bookkeeping_is_monotone() {
    let (m, tr, va) = tiny_problem();
    let cfg = TrainConfig { horizon: 3, epochs: 6, batch_size: 8, alpha: 5e-3, seed: 3, ..Default::default() };
    let mut lines = Vec::new();
    let a = train(m.clone(), &tr, &va, &cfg, |r| lines.push(r.epoch)).unwrap();
    let b = train(m.clone(), &tr, &va, &TrainConfig { workers: 2, ..cfg.clone() }, |_| {}).unwrap();
    assert_eq!(lines, (1..=6).collect::<Vec<_>>());
    assert_eq!(a.final_model, b.final_model);
    assert_eq!(a.train_loss, b.train_loss);
    assert_eq!(a.val_nrms, b.val_nrms);
    assert!(a.val_nrms.iter().all(|&v| a.best_val_nrms <= v));
    assert_eq!(a.val_nrms[a.best_epoch], a.best_val_nrms);
    assert!(a.train_loss.last().unwrap() < &a.train_loss[0]);
}

#[test]
fn divergence_is_reported_with_epoch() {
    let (mut m, tr, va) = tiny_problem();
    m.a *= 1e120;
    let cfg = TrainConfig { horizon: 3, epochs: 2, ..Default::default() };
    let err = train(m, &tr, &va, &cfg, |_| {}).unwrap_err();
    assert!(matches!(err, Error::Numeric(ref msg) if msg.contains("epoch 1")), "{err}");
}

#[test]
fn validation_score_single_section_equals_simulation_nrms() {
    let (m, _, va) = tiny_problem();
    let traj = &va.trajectories[0];
    let start = m.burn_in();
    let z0: LiftedState = m.encode_at(traj, start).unwrap();
    let u = traj.inputs.as_ref().unwrap().slice(s![start..traj.len() - 1, ..]);
    let y_hat = m.simulate(&z0, Excitation::Forced(u)).unwrap();
    let y = traj.outputs.slice(s![start.., ..]);
    let rms = ((&y_hat - &y).iter().map(|v| v * v).sum::<f64>() / y.nrows() as f64).sqrt();
    let sigma = traj.outputs.column(0).std(0.0);
    assert!((validation_score(&m, &va).unwrap() - rms / sigma).abs() < 1e-12);
}
