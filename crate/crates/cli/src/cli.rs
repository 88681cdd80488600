use std::io::Write;
use std::ops::Range;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use deepkoop_core::embedding::PolySystem;
use deepkoop_core::{Error, Result};

use crate::commands;
use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "deepkoop", version, about = "Deep Koopman encoder system identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate (or import) the experiment data and write it as CSV.
    Generate(RunArgs),
    /// Train a model on the generated data.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Continue from the last checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a trained model on the test (and arrowhead) records.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Model file; defaults to model.json in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Sample range START:END scored in the masked row.
        #[arg(long, value_parser = parse_mask)]
        mask: Option<Range<usize>>,
    },
    /// Compare the polynomial example with its exact lifted linear system.
    DemoEmbedding {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        /// Initial state X1,X2.
        #[arg(long, value_parser = parse_pair, allow_negative_numbers = true)]
        x0: [f64; 2],
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Offset of the lifted initial condition from the constraint surface.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        psi: f64,
    },
    /// Print the resolved experiment document.
    ShowConfig(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment document (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment: vdp, vdp-desk or silverbox-synthetic.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the master seed and the shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => return Err(Error::Usage("one of --config or --preset is required".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn parse_mask(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad START: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad END: {e}"))?;
    if a >= b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok(a..b)
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected X1,X2")?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"));
    Ok([parse(a)?, parse(b)?])
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(run) => {
            let cfg = run.resolve()?;
            let manifest = commands::generate(&cfg)?;
            let n: usize = manifest.files.values().map(Vec::len).sum();
            writeln!(out, "wrote {n} records to {}", cfg.data_dir().display())?;
        }
        Command::Train { run, epochs, workers, resume } => {
            let mut cfg = run.resolve()?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(w) = workers {
                cfg.train.workers = w;
            }
            let report = commands::train(&cfg, resume, out)?;
            writeln!(out, "best epoch {} val_nrms {:.6}", report.best_epoch, report.best_val_nrms)?;
        }
        Command::Eval { run, model, mask } => {
            let cfg = run.resolve()?;
            let doc = commands::eval(&cfg, model.as_deref(), mask)?;
            write!(out, "{}", commands::format_eval(&doc))?;
        }
        Command::DemoEmbedding { a, b, c, x0, steps, psi } => {
            commands::demo_embedding(PolySystem { a, b, c }, x0, steps, psi, out)?;
        }
        Command::ShowConfig(run) => write!(out, "{}", run.resolve()?.to_toml()?)?,
    }
    Ok(())
}

/// The single-line form every failure is reported in.
pub fn error_line(e: &Error) -> String {
    format!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "))
}
