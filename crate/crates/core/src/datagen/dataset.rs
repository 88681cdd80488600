use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
    /// Test record with growing excitation amplitude, used to probe extrapolation.
    Arrowhead,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
            Role::Arrowhead => "arrowhead",
        }
    }
}

/// One record. Rows are time samples, columns channels.
///
/// `states` holds the noiseless simulated state when it is known; models in
/// full-state mode read the measured `outputs` (the identity output map).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Option<Array2<f64>>,
    pub inputs: Option<Array2<f64>>,
    pub outputs: Array2<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(states: Option<Array2<f64>>, inputs: Option<Array2<f64>>, outputs: Array2<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("sampling period must be positive, got {dt}")));
        }
        let n = outputs.nrows();
        for (name, m) in [("states", &states), ("inputs", &inputs)] {
            if let Some(m) = m {
                if m.nrows() != n {
                    return Err(Error::Shape(format!("{name} have {} samples but outputs have {n}", m.nrows())));
                }
            }
        }
        let inputs = inputs.filter(|u| u.ncols() > 0);
        Ok(Trajectory { states, inputs, outputs, dt })
    }

    pub fn len(&self) -> usize {
        self.outputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_y(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn n_u(&self) -> usize {
        self.inputs.as_ref().map_or(0, |u| u.ncols())
    }

    pub fn n_x(&self) -> usize {
        self.states.as_ref().map_or(0, |x| x.ncols())
    }

    pub fn output(&self, k: usize) -> ArrayView1<'_, f64> {
        self.outputs.row(k)
    }

    pub fn input(&self, k: usize) -> Option<ArrayView1<'_, f64>> {
        self.inputs.as_ref().map(|u| u.row(k))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(role: Role, trajectories: Vec<Trajectory>) -> Result<Self> {
        if let Some(first) = trajectories.first() {
            for (i, t) in trajectories.iter().enumerate() {
                if t.n_y() != first.n_y() || t.n_u() != first.n_u() || t.n_x() != first.n_x() {
                    return Err(Error::Shape(format!(
                        "{} dataset: trajectory {i} has dims (x={}, u={}, y={}), expected (x={}, u={}, y={})",
                        role.name(),
                        t.n_x(),
                        t.n_u(),
                        t.n_y(),
                        first.n_x(),
                        first.n_u(),
                        first.n_y()
                    )));
                }
            }
        }
        Ok(Dataset { role, trajectories })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_y(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::n_y)
    }

    pub fn n_u(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::n_u)
    }

    pub fn total_samples(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// Output of a generator: one dataset per role.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub arrowhead: Option<Dataset>,
}

impl Splits {
    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        [&self.train, &self.validation, &self.test].into_iter().chain(self.arrowhead.as_ref())
    }
}
