//! Experiment documents (TOML) and built-in presets.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use deepkoop_core::datagen::{CsvSchema, DuffingConfig, VdpConfig};
use deepkoop_core::{EncoderMode, Error, InputMapSpec, ModelSpec, Result, Role, TrainConfig};
use serde::{Deserialize, Serialize};

/// One experiment: where the data comes from, the model, and how to train it.
///
/// Every table except `data` and `model` may be omitted; see the field
/// defaults on [`TrainConfig`], [`VdpConfig`] and [`DuffingConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed for data generation and model initialization.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub data: DataSource,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum DataSource {
    Vdp(VdpConfig),
    Duffing(DuffingConfig),
    Csv(CsvSource),
}

impl DataSource {
    pub fn name(&self) -> &'static str {
        match self {
            DataSource::Vdp(_) => "vdp",
            DataSource::Duffing(_) => "duffing",
            DataSource::Csv(_) => "csv",
        }
    }
}

/// Externally recorded data: either one long `record` split by the schema's
/// segments, or explicit `files` per role. Relative paths resolve against the
/// config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub schema: CsvSchema,
    #[serde(default)]
    pub record: Option<PathBuf>,
    #[serde(default)]
    pub files: BTreeMap<Role, Vec<PathBuf>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Sample range `[start, end)` scored in the masked arrowhead row.
    #[serde(default)]
    pub mask: Option<[usize; 2]>,
}

impl EvalConfig {
    pub fn mask_range(&self) -> Option<Range<usize>> {
        self.mask.map(|[a, b]| a..b)
    }
}

pub const PRESETS: &[&str] = &["vdp", "vdp-desk", "silverbox-synthetic"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "vdp" => Ok(vdp(80, 20, 10, 100)),
            "vdp-desk" => Ok(ExperimentConfig { name: "vdp-desk".into(), out: "run/vdp-desk".into(), ..vdp(20, 5, 5, 40) }),
            "silverbox-synthetic" => Ok(silverbox_synthetic()),
            _ => Err(Error::Config(format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")))),
        }
    }

    /// Parses a TOML document; relative CSV paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let msg = e.message().replace('\n', " ");
            Error::Config(match line {
                Some(l) => format!("line {l}: {msg}"),
                None => msg,
            })
        })?;
        if let DataSource::Csv(src) = &mut cfg.data {
            if let Some(r) = &mut src.record {
                *r = base.join(&*r);
            }
            for f in src.files.values_mut().flatten() {
                *f = base.join(&*f);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some([a, b]) = self.eval.mask {
            if a >= b {
                return Err(Error::Config(format!("eval.mask must satisfy start < end, got [{a}, {b}]")));
            }
        }
        if let DataSource::Csv(src) = &self.data {
            if src.record.is_some() == !src.files.is_empty() {
                return Err(Error::Config("csv data needs exactly one of `record` or `files`".into()));
            }
        }
        Ok(())
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }
}

fn vdp(n_train: usize, n_val: usize, n_test: usize, n_z: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: "vdp".into(),
        seed: 0,
        out: "run/vdp".into(),
        data: DataSource::Vdp(VdpConfig { n_train, n_val, n_test, ..VdpConfig::default() }),
        model: ModelSpec {
            mode: EncoderMode::FullState { n_x: 2 },
            n_z,
            n_u: 0,
            n_y: 2,
            encoder_hidden: vec![100],
            input_map: InputMapSpec::default(),
        },
        train: TrainConfig {
            horizon: 149,
            batch_size: 256,
            alpha: 1e-4,
            beta1: 0.7,
            beta2: 0.9,
            epochs: 300,
            ..TrainConfig::default()
        },
        eval: EvalConfig::default(),
    }
}

fn silverbox_synthetic() -> ExperimentConfig {
    let data = DuffingConfig::default();
    let arrow = data.arrowhead_len;
    ExperimentConfig {
        name: "silverbox-synthetic".into(),
        seed: 0,
        out: "run/silverbox-synthetic".into(),
        data: DataSource::Duffing(data),
        model: ModelSpec {
            mode: EncoderMode::IoHistory { n_a: 10, n_b: 10 },
            n_z: 20,
            n_u: 1,
            n_y: 1,
            encoder_hidden: vec![40, 40],
            input_map: InputMapSpec::Network { hidden: vec![40] },
        },
        train: TrainConfig {
            horizon: 49,
            batch_size: 256,
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 300,
            ..TrainConfig::default()
        },
        // the growing-amplitude tail of the arrowhead record is left out
        eval: EvalConfig { mask: Some([0, arrow * 3 / 5]) },
    }
}
