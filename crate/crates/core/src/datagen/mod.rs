//! Benchmark data: oscillator simulation, excitation signals, measurement
//! noise, and CSV ingestion for externally recorded data.

mod csvio;
mod dataset;
mod duffing;
mod manifest;
mod noise;
mod ode;
mod signals;
mod vdp;

pub use csvio::{load_csv, load_segments, save_csv, save_dataset, CsvSchema, Segment};
pub use dataset::{Dataset, Role, Splits, Trajectory};
pub use duffing::{generate_duffing_dataset, simulate_duffing, DuffingConfig, DuffingParams};
pub use manifest::Manifest;
pub use noise::{add_noise_snr, add_noise_snr_with};
pub use ode::{rk4_step, simulate_rk4, vdp_derivative};
pub use signals::{arrowhead, multisine, ArrowheadSpec, MultisineSpec};
pub use vdp::{generate_vdp_dataset, VdpConfig};
