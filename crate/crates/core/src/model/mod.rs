//! The stage autoencoder, the nine-stage chain and their on-disk format.

mod checkpoint;
mod itcnet;
mod spec;
mod stage;

pub use checkpoint::{
    decode, fnv1a64, load_checkpoint, load_net, load_stage, save_net, save_stage, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use itcnet::{stack_itcnet, ItcNet, ItcNetTape, STAGE_COUNT};
pub use spec::{ConvLayerSpec, StageSpec};
pub use stage::{ConvBlock, StageTape, StageWeights};

use crate::error::Result;
use crate::tensor::Tensor;

/// Anything that maps a batch of incomplete GEIs `[B,1,64,64]` to
/// reconstructions of the same shape.
pub trait Reconstructor {
    fn reconstruct(&self, batch: &Tensor) -> Result<Tensor>;
}

/// Returns its input unchanged; the baseline "no reconstruction" model.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityReconstructor;

impl Reconstructor for IdentityReconstructor {
    fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(batch.clone())
    }
}
