//! Reconstruction of complete gait energy images (GEIs) from incomplete ones.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] – a small deterministic array engine with exactly the layers
//!   the autoencoders need, each with a hand-derived backward pass.
//! * [`model`] – the fully convolutional stage autoencoder, the nine-stage
//!   [`model::ItcNet`] chain and the binary checkpoint format.
//! * [`optim`] – Adam and the step-decay learning-rate schedule.
//! * [`data`] – silhouette ingestion, registration, GEI computation and a
//!   synthetic walker generator.
//! * [`metrics`] – reconstruction (MSE, SSIM, Recon-Acc) and recognition
//!   (CMC, ROC, EER) metrics.
//! * [`pipeline`] – stage training, stacking, fine-tuning and evaluation
//!   reports.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
mod parallel;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::Tensor;
