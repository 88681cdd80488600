use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use deepkoop_core::datagen::{
    generate_duffing_dataset, generate_vdp_dataset, load_csv, load_segments, save_dataset, CsvSchema, Manifest,
};
use deepkoop_core::embedding::{compare, constraint_psi, poly_lift, PolySystem};
use deepkoop_core::metrics::{self, EvalReport};
use deepkoop_core::training::{self, EpochRecord};
use deepkoop_core::{Dataset, Error, KoopmanModel, Result, Role, TrainReport};
use serde::Serialize;

use crate::config::{DataSource, ExperimentConfig};

pub const MANIFEST: &str = "manifest.json";
pub const MODEL: &str = "model.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const TRAIN_LOG: &str = "train.log";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const SIM_DIR: &str = "sim";

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => io_at(path)(io),
        other => other,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(io_at(path))
}

fn load_model(path: &Path) -> Result<KoopmanModel> {
    KoopmanModel::load(path).map_err(|e| with_path(path, e))
}

fn source_datasets(cfg: &ExperimentConfig) -> Result<(BTreeMap<Role, Dataset>, serde_json::Value)> {
    let from_splits = |s: deepkoop_core::datagen::Splits| s.iter().map(|d| (d.role, d.clone())).collect();
    Ok(match &cfg.data {
        DataSource::Vdp(v) => (from_splits(generate_vdp_dataset(v, cfg.seed)?), serde_json::to_value(v)?),
        DataSource::Duffing(d) => (from_splits(generate_duffing_dataset(d, cfg.seed)?), serde_json::to_value(d)?),
        DataSource::Csv(src) => {
            let sets = match &src.record {
                Some(path) => load_segments(path, &src.schema).map_err(|e| with_path(path, e))?,
                None => src
                    .files
                    .iter()
                    .map(|(&role, paths)| {
                        let trajs = paths
                            .iter()
                            .map(|p| load_csv(p, &src.schema).map_err(|e| with_path(p, e)))
                            .collect::<Result<Vec<_>>>()?;
                        Ok((role, Dataset::new(role, trajs)?))
                    })
                    .collect::<Result<_>>()?,
            };
            (sets, serde_json::to_value(src)?)
        }
    })
}

/// Generates (or imports) the experiment data into `<out>/data` as one CSV per
/// trajectory plus a manifest.
pub fn generate(cfg: &ExperimentConfig) -> Result<Manifest> {
    let (sets, params) = source_datasets(cfg)?;
    let first = sets
        .values()
        .next()
        .and_then(|d| d.trajectories.first())
        .ok_or_else(|| Error::Config("data source produced no trajectories".into()))?;
    let schema = CsvSchema::for_trajectory(first);
    let dir = cfg.data_dir();
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let mut files = BTreeMap::new();
    for (role, ds) in &sets {
        files.insert(*role, save_dataset(ds, &dir).map_err(|e| with_path(&dir, e))?);
    }
    let manifest = Manifest { generator: cfg.data.name().into(), seed: cfg.seed, params, schema, files };
    manifest.save(&dir.join(MANIFEST)).map_err(|e| with_path(&dir, e))?;
    Ok(manifest)
}

/// Reads the dataset of `role` listed in the manifest, if any.
pub fn load_role(cfg: &ExperimentConfig, role: Role) -> Result<Option<Dataset>> {
    let dir = cfg.data_dir();
    let path = dir.join(MANIFEST);
    let manifest = Manifest::load(&path).map_err(|e| with_path(&path, e))?;
    let Some(names) = manifest.files.get(&role) else {
        return Ok(None);
    };
    let trajs = names
        .iter()
        .map(|n| {
            let p = dir.join(n);
            load_csv(&p, &manifest.schema).map_err(|e| with_path(&p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(Dataset::new(role, trajs)?))
}

fn require_role(cfg: &ExperimentConfig, role: Role) -> Result<Dataset> {
    load_role(cfg, role)?.ok_or_else(|| Error::Usage(format!("the data manifest lists no {} records", role.name())))
}

fn check_compatible(model: &KoopmanModel, ds: &Dataset) -> Result<()> {
    if model.n_y != ds.n_y() || model.n_u != ds.n_u() {
        return Err(Error::Shape(format!(
            "model expects n_y={} n_u={}, {} data has n_y={} n_u={}",
            model.n_y,
            model.n_u,
            ds.role.name(),
            ds.n_y(),
            ds.n_u()
        )));
    }
    Ok(())
}

pub fn format_epoch(r: &EpochRecord) -> String {
    format!("epoch {:>4}  loss {:.6e}  val_nrms {:.6}  wall {:.3}s", r.epoch, r.train_loss, r.val_nrms, r.wall_seconds)
}

/// Trains on the generated data. With `resume`, starts from the last
/// checkpoint instead of a fresh initialization (optimizer moments restart).
/// Writes the best model, a checkpoint of the final parameters, the report,
/// and appends one line per epoch to the log and to `echo`.
pub fn train(cfg: &ExperimentConfig, resume: bool, echo: &mut dyn Write) -> Result<TrainReport> {
    let train_ds = require_role(cfg, Role::Train)?;
    let val_ds = require_role(cfg, Role::Validation)?;
    let checkpoint = cfg.out.join(CHECKPOINT);
    let model = if resume { load_model(&checkpoint)? } else { KoopmanModel::init(&cfg.model, cfg.seed)? };
    check_compatible(&model, &train_ds)?;
    check_compatible(&model, &val_ds)?;

    let log_path = cfg.out.join(TRAIN_LOG);
    let mut log = OpenOptions::new().create(true).append(true).open(&log_path).map_err(io_at(&log_path))?;
    let header = format!(
        "# {} seed {} {}",
        cfg.name,
        cfg.seed,
        if resume { "resumed from checkpoint" } else { "fresh start" }
    );
    writeln!(log, "{header}").map_err(io_at(&log_path))?;
    let mut sink_err = None;
    let report = training::train(model, &train_ds, &val_ds, &cfg.train, |r| {
        let line = format_epoch(r);
        if let Err(e) = writeln!(log, "{line}").and_then(|_| writeln!(echo, "{line}")) {
            sink_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = sink_err {
        return Err(io_at(&log_path)(e));
    }
    let best = cfg.out.join(MODEL);
    report.best_model.save(&best).map_err(|e| with_path(&best, e))?;
    report.final_model.save(&checkpoint).map_err(|e| with_path(&checkpoint, e))?;
    write_json(&cfg.out.join(TRAIN_REPORT), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub name: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalDocument {
    /// File name of the evaluated model.
    pub model: String,
    pub rows: Vec<EvalRow>,
}

/// Writes `k, y*, y*_hat, r*` for every sample of one simulated section. For two
/// outputs the `y0_hat, y1_hat` pair is the simulated phase portrait.
fn write_simulation(path: &Path, report: &EvalReport, ds: &Dataset, i: usize) -> Result<()> {
    let sim = &report.simulations[i];
    let traj = &ds.trajectories[i];
    let n_y = traj.n_y();
    let mut text = String::from("k");
    (0..n_y).for_each(|c| text.push_str(&format!(",y{c}")));
    (0..n_y).for_each(|c| text.push_str(&format!(",y{c}_hat")));
    (0..n_y).for_each(|c| text.push_str(&format!(",r{c}")));
    text.push('\n');
    for (j, pred) in sim.y_hat.rows().into_iter().enumerate() {
        let k = sim.start + j;
        let meas = traj.output(k);
        text.push_str(&k.to_string());
        for v in meas.iter().chain(pred.iter()) {
            text.push_str(&format!(",{v}"));
        }
        for (p, m) in pred.iter().zip(meas.iter()) {
            text.push_str(&format!(",{}", p - m));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(io_at(path))
}

/// Evaluates `model` (default `<out>/model.json`) on the test records and, when
/// present, the arrowhead record with and without `mask`.
pub fn eval(cfg: &ExperimentConfig, model_path: Option<&Path>, mask: Option<Range<usize>>) -> Result<EvalDocument> {
    let path: PathBuf = model_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(MODEL));
    let model = load_model(&path)?;
    let mask = mask.or_else(|| cfg.eval.mask_range());
    let test = require_role(cfg, Role::Test)?;
    let arrowhead = load_role(cfg, Role::Arrowhead)?;
    let mut runs: Vec<(String, &Dataset, Option<Range<usize>>)> = vec![("test".into(), &test, None)];
    match (&arrowhead, &mask) {
        (Some(a), m) => {
            runs.push(("arrowhead".into(), a, None));
            if let Some(m) = m {
                runs.push(("arrowhead-masked".into(), a, Some(m.clone())));
            }
        }
        (None, Some(m)) => runs.push(("test-masked".into(), &test, Some(m.clone()))),
        (None, None) => {}
    }
    let sim_dir = cfg.out.join(SIM_DIR);
    fs::create_dir_all(&sim_dir).map_err(io_at(&sim_dir))?;
    let mut rows = Vec::with_capacity(runs.len());
    for (name, ds, m) in runs {
        check_compatible(&model, ds)?;
        let report = metrics::evaluate(&model, ds, m.clone())?;
        if m.is_none() {
            for i in 0..ds.len() {
                write_simulation(&sim_dir.join(format!("{}_{i:03}.csv", ds.role.name())), &report, ds, i)?;
            }
        }
        rows.push(EvalRow { name, report });
    }
    let model_name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    let doc = EvalDocument { model: model_name, rows };
    write_json(&cfg.out.join(EVAL_REPORT), &doc)?;
    Ok(doc)
}

pub fn format_eval(doc: &EvalDocument) -> String {
    let mut s = format!("{:<18} {:>14} {:>14}\n", "set", "RMS", "NRMS");
    for row in &doc.rows {
        s.push_str(&format!("{:<18} {:>14.6e} {:>14.6e}\n", row.name, row.report.rms, row.report.nrms));
    }
    s
}

/// Prints the polynomial system and its lifted linear embedding side by side.
/// `psi` shifts the third lifted coordinate off the constraint surface.
pub fn demo_embedding(sys: PolySystem, x0: [f64; 2], steps: usize, psi: f64, out: &mut dyn Write) -> Result<f64> {
    let mut z0 = poly_lift(x0);
    z0[2] -= psi;
    let cmp = compare(&sys, x0, Some(z0), steps);
    writeln!(out, "# a={} b={} c={} x0=({}, {}) psi(z0)={}", sys.a, sys.b, sys.c, x0[0], x0[1], constraint_psi(&cmp.lifted[0]))?;
    writeln!(out, "k,x1,x2,z1,z2,z3,psi_x,psi_z,deviation")?;
    for (k, (x, z)) in cmp.nonlinear.iter().zip(&cmp.lifted).enumerate() {
        let dev = (x[0] - z[0]).abs().max((x[1] - z[1]).abs());
        writeln!(
            out,
            "{k},{},{},{},{},{},{},{},{dev}",
            x[0],
            x[1],
            z[0],
            z[1],
            z[2],
            constraint_psi(&poly_lift(*x)),
            constraint_psi(z)
        )?;
    }
    writeln!(out, "# max deviation {}", cmp.max_deviation)?;
    Ok(cmp.max_deviation)
}
