use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::model::KoopmanModel;

/// Start of one prediction section: sample `start` of trajectory `traj`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectionIndex {
    pub traj: usize,
    pub start: usize,
}

/// Every start index (stride 1) with a full encoder window before it and
/// `horizon` further samples after it, in trajectory-then-time order.
pub fn enumerate_sections(ds: &Dataset, model: &KoopmanModel, horizon: usize) -> Result<Vec<SectionIndex>> {
    let burn_in = model.burn_in();
    let mut out = Vec::new();
    for (traj, t) in ds.trajectories.iter().enumerate() {
        if t.len() < burn_in + horizon + 1 {
            continue;
        }
        out.extend((burn_in..=t.len() - 1 - horizon).map(|start| SectionIndex { traj, start }));
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no section of horizon {horizon} fits the {} data after a burn-in of {burn_in} samples",
            ds.role.name()
        )));
    }
    Ok(out)
}
