//! Exact finite-dimensional embedding of the polynomial system
//!
//! ```text
//! x1[k+1] = a x1[k]
//! x2[k+1] = b x2[k] - c x1[k]^2
//! ```
//!
//! Lifting `z = (x1, x2, x1^2)` makes the dynamics linear, `z[k+1] = A z[k]`,
//! but the linear system has more solutions than the original one: only
//! initial conditions with `psi(z) = z1^2 - z3 = 0` correspond to trajectories
//! of the polynomial system.

use ndarray::{array, Array1, Array2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolySystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PolySystem {
    pub fn step(&self, x: [f64; 2]) -> [f64; 2] {
        poly_step(self, x)
    }
}

pub fn poly_step(sys: &PolySystem, x: [f64; 2]) -> [f64; 2] {
    [sys.a * x[0], sys.b * x[1] - sys.c * x[0] * x[0]]
}

pub fn poly_lift(x: [f64; 2]) -> Array1<f64> {
    array![x[0], x[1], x[0] * x[0]]
}

pub fn constraint_psi(z: &Array1<f64>) -> f64 {
    z[0] * z[0] - z[2]
}

/// Lifted linear dynamics of a [`PolySystem`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolyKoopman {
    pub a: Array2<f64>,
}

impl PolyKoopman {
    pub fn new(sys: &PolySystem) -> Self {
        PolyKoopman {
            a: array![[sys.a, 0.0, 0.0], [0.0, sys.b, -sys.c], [0.0, 0.0, sys.a * sys.a]],
        }
    }

    pub fn step(&self, z: &Array1<f64>) -> Array1<f64> {
        self.a.dot(z)
    }
}

/// Side-by-side simulation used by the demo command.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingComparison {
    /// Polynomial system from `x0`.
    pub nonlinear: Vec<[f64; 2]>,
    /// Lifted linear system from `z0`.
    pub lifted: Vec<Array1<f64>>,
    /// `max_k |x[k] - (z1[k], z2[k])|`.
    pub max_deviation: f64,
}

/// Runs both systems for `steps` steps. `z0` defaults to `poly_lift(x0)`.
pub fn compare(sys: &PolySystem, x0: [f64; 2], z0: Option<Array1<f64>>, steps: usize) -> EmbeddingComparison {
    let koop = PolyKoopman::new(sys);
    let mut x = x0;
    let mut z = z0.unwrap_or_else(|| poly_lift(x0));
    let mut nonlinear = vec![x];
    let mut lifted = vec![z.clone()];
    for _ in 0..steps {
        x = sys.step(x);
        z = koop.step(&z);
        nonlinear.push(x);
        lifted.push(z.clone());
    }
    let max_deviation = nonlinear
        .iter()
        .zip(&lifted)
        .map(|(x, z)| (x[0] - z[0]).abs().max((x[1] - z[1]).abs()))
        .fold(0.0, f64::max);
    EmbeddingComparison { nonlinear, lifted, max_deviation }
}
