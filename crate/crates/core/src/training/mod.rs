//! Multi-step prediction loss over data sections, its exact gradient, Adam,
//! and the epoch loop with validation-based model selection.

mod adam;
mod grad;
mod loss;
mod sections;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use grad::{InputMapGrad, ModelGrad};
pub use loss::{batch_gradient, batch_gradient_with, batch_loss, batch_loss_with, section_loss, CHUNK_SECTIONS};
pub use sections::{enumerate_sections, SectionIndex};
pub use train::{train, validation_score, EpochRecord, TrainConfig, TrainReport};
