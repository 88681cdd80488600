//! Deep Koopman encoder identification.
//!
//! A neural encoder lifts past measurements into a state `z` whose dynamics are
//! `z[k+1] = A z[k] + B(z[k]) u[k]` with output `y[k] = C z[k]`. The crate holds the
//! numeric substrate (dense networks with hand-written backprop), the model, the
//! multi-step prediction loss and its optimizer, benchmark data generators, and
//! simulation error metrics.

pub mod datagen;
pub mod embedding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numcore;
pub mod rng;
pub mod training;

pub use datagen::{Dataset, Role, Trajectory};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use model::{EncoderMode, InputMap, InputMapSpec, KoopmanModel, LiftedState, ModelSpec};
pub use numcore::{Activation, GradientBundle, MlpParams};
pub use training::{AdamState, SectionIndex, TrainConfig, TrainReport};
