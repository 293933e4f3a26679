//! Stage training, stacking, fine-tuning, evaluation and report files.

mod config;
mod dataset;
mod eval;
mod run;
pub mod report;
mod train;

pub use config::{default_boundaries, TrainConfig};
pub use dataset::{build_complete_dataset, build_stage_dataset, stack, GeiPairs};
pub use eval::{
    evaluate_recognition, evaluate_reconstruction, reconstruct_all, Condition, RecogCurves, RecogReport, RecogRow,
    ReconReport, ReconRow, ReconSample,
};
pub use run::{
    finetune_net, generate_walkers, register_all, run_on, run_synthetic, subject_id, train_one_stage, with_threads,
    Prepared, RunOutcome,
};
pub use train::{finetune_itcnet, net_loss, stage_loss, streams, train_stage, LossHistory};
