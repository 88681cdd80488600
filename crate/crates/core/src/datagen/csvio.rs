use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{Dataset, Role, Trajectory};
use crate::error::{Error, Result};

/// Column mapping for a CSV record: one header row, one sample per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub dt: f64,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub states: Vec<String>,
    /// Optional split of one long record into role segments `[start, end)`.
    #[serde(default)]
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub role: Role,
    pub start: usize,
    pub end: usize,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl CsvSchema {
    /// Schema matching the columns written by [`save_csv`] for this trajectory.
    pub fn for_trajectory(traj: &Trajectory) -> Self {
        CsvSchema {
            dt: traj.dt,
            inputs: names("u", traj.n_u()),
            outputs: names("y", traj.n_y()),
            states: names("x", traj.n_x()),
            segments: Vec::new(),
        }
    }
}

/// Writes `k, x0.., u0.., y0..` with round-trip decimal formatting.
pub fn save_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let schema = CsvSchema::for_trajectory(traj);
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let header: Vec<&str> = std::iter::once("k")
        .chain(schema.states.iter().map(String::as_str))
        .chain(schema.inputs.iter().map(String::as_str))
        .chain(schema.outputs.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(csv_io)?;
    for k in 0..traj.len() {
        let mut row = vec![k.to_string()];
        let blocks = [traj.states.as_ref(), traj.inputs.as_ref(), Some(&traj.outputs)];
        for m in blocks.into_iter().flatten() {
            row.extend(m.row(k).iter().map(|v| v.to_string()));
        }
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("line {line}: {e}"))
        }
    }
}

fn column_block(header: &csv::StringRecord, wanted: &[String], path: &Path) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("{}: missing column '{name}'", path.display())))
        })
        .collect()
}

/// Reads one record into a trajectory following `schema`'s column names.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Trajectory> {
    if schema.outputs.is_empty() {
        return Err(Error::Config("CSV schema must name at least one output column".into()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_io)?;
    let header = reader.headers().map_err(csv_io)?.clone();
    let cols = [
        column_block(&header, &schema.states, path)?,
        column_block(&header, &schema.inputs, path)?,
        column_block(&header, &schema.outputs, path)?,
    ];
    let mut data: [Vec<f64>; 3] = Default::default();
    let mut rows = 0usize;
    for rec in reader.records() {
        let rec = rec.map_err(csv_io)?;
        let line = rec.position().map_or(0, |p| p.line());
        for (block, idx) in data.iter_mut().zip(&cols) {
            for &c in idx {
                let field = rec.get(c).unwrap_or("");
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("{} line {line}: column '{}' holds '{field}', not a number", path.display(), &header[c]))
                })?;
                block.push(v);
            }
        }
        rows += 1;
    }
    let [states, inputs, outputs] = data;
    let to_matrix = |v: Vec<f64>, width: usize| Array2::from_shape_vec((rows, width), v).expect("row-major fill");
    Trajectory::new(
        (!schema.states.is_empty()).then(|| to_matrix(states, schema.states.len())),
        (!schema.inputs.is_empty()).then(|| to_matrix(inputs, schema.inputs.len())),
        to_matrix(outputs, schema.outputs.len()),
        schema.dt,
    )
}

/// Loads one long record and cuts it into per-role datasets using `schema.segments`.
pub fn load_segments(path: &Path, schema: &CsvSchema) -> Result<BTreeMap<Role, Dataset>> {
    if schema.segments.is_empty() {
        return Err(Error::Config("CSV schema defines no segments".into()));
    }
    let full = load_csv(path, schema)?;
    let mut parts: BTreeMap<Role, Vec<Trajectory>> = BTreeMap::new();
    for seg in &schema.segments {
        if seg.start >= seg.end || seg.end > full.len() {
            return Err(Error::Config(format!(
                "segment {:?} [{}, {}) does not fit a record of {} samples",
                seg.role,
                seg.start,
                seg.end,
                full.len()
            )));
        }
        let cut = |m: &Array2<f64>| m.slice(s![seg.start..seg.end, ..]).to_owned();
        let t = Trajectory::new(full.states.as_ref().map(cut), full.inputs.as_ref().map(cut), cut(&full.outputs), full.dt)?;
        parts.entry(seg.role).or_default().push(t);
    }
    parts.into_iter().map(|(role, trajs)| Ok((role, Dataset::new(role, trajs)?))).collect()
}

/// Writes each trajectory to `dir/<role>_<index>.csv`; returns the file names.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(ds.len());
    for (i, t) in ds.trajectories.iter().enumerate() {
        let name = format!("{}_{i:03}.csv", ds.role.name());
        save_csv(t, &dir.join(&name))?;
        files.push(name);
    }
    Ok(files)
}
