#![allow(dead_code)]

use deepkoop_core::rng::{self, Rng};
use deepkoop_core::{Dataset, EncoderMode, InputMapSpec, KoopmanModel, ModelSpec, Role, Trajectory};
use ndarray::Array2;
use rand::Rng as _;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Random forced dataset with `n_u` inputs and `n_y` outputs.
pub fn random_dataset(lengths: &[usize], n_u: usize, n_y: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, 500, 0);
    let trajs = lengths
        .iter()
        .map(|&n| {
            let u = (n_u > 0).then(|| random_matrix(n, n_u, &mut rng));
            Trajectory::new(None, u, random_matrix(n, n_y, &mut rng), 0.1).unwrap()
        })
        .collect();
    Dataset::new(Role::Train, trajs).unwrap()
}

pub fn io_model(n_z: usize, n_u: usize, n_y: usize, n_a: usize, n_b: usize, seed: u64) -> KoopmanModel {
    let spec = ModelSpec {
        mode: EncoderMode::IoHistory { n_a, n_b },
        n_z,
        n_u,
        n_y,
        encoder_hidden: vec![4],
        input_map: InputMapSpec::Network { hidden: vec![3] },
    };
    KoopmanModel::init(&spec, seed).unwrap()
}

pub fn fs_model(n_x: usize, n_z: usize, n_u: usize, seed: u64) -> KoopmanModel {
    let spec = ModelSpec {
        mode: EncoderMode::FullState { n_x },
        n_z,
        n_u,
        n_y: n_x,
        encoder_hidden: vec![5],
        input_map: InputMapSpec::Network { hidden: vec![3] },
    };
    KoopmanModel::init(&spec, seed).unwrap()
}

/// Shrinks A so long rollouts stay bounded.
pub fn damped(mut m: KoopmanModel, factor: f64) -> KoopmanModel {
    m.a *= factor;
    m
}
