use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Unforced Van der Pol vector field: `(x2, mu (1 - x1^2) x2 - x1)`.
pub fn vdp_derivative(x: &[f64], mu: f64) -> [f64; 2] {
    [x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]]
}

/// One classical Runge-Kutta 4 step of `dx/dt = f(x, u)` with `u` held constant.
pub fn rk4_step<F>(f: F, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("RK4 step size must be positive, got {dt}")));
    }
    let n = x.len();
    let shifted = |k: &[f64], h: f64| -> Vec<f64> { (0..n).map(|i| x[i] + h * k[i]).collect() };
    let k1 = f(x, u);
    let k2 = f(&shifted(&k1, 0.5 * dt), u);
    let k3 = f(&shifted(&k2, 0.5 * dt), u);
    let k4 = f(&shifted(&k3, dt), u);
    let next: Vec<f64> = (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("RK4 produced a non-finite state".into()));
    }
    Ok(next)
}

/// Samples `x_0 .. x_{n-1}` of a zero-order-hold simulation. Each sample
/// interval `dt` is covered by `substeps` RK4 steps with input row `k` held.
/// `inputs` has `n` rows (the last one is never applied) or is `None` with
/// an explicit `n`.
pub fn simulate_rk4<F>(f: F, x0: &[f64], inputs: Option<ArrayView2<f64>>, n: usize, dt: f64, substeps: usize) -> Result<Array2<f64>>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    if substeps == 0 {
        return Err(Error::Usage("substeps must be at least 1".into()));
    }
    if let Some(u) = &inputs {
        if u.nrows() != n {
            return Err(Error::Shape(format!("{} input samples for {n} states", u.nrows())));
        }
    }
    let h = dt / substeps as f64;
    let mut out = Array2::zeros((n, x0.len()));
    let mut x = x0.to_vec();
    let empty: [f64; 0] = [];
    for k in 0..n {
        out.row_mut(k).iter_mut().zip(&x).for_each(|(o, v)| *o = *v);
        if k + 1 == n {
            break;
        }
        let u_row = inputs.as_ref().map(|u| u.row(k).to_vec());
        let u = u_row.as_deref().unwrap_or(&empty);
        for _ in 0..substeps {
            x = rk4_step(&f, &x, u, h)?;
        }
    }
    Ok(out)
}
