//! Mini-batch training of single stages and of the stacked chain.

use log::info;

use super::config::TrainConfig;
use super::dataset::GeiPairs;
use crate::error::{Error, Result};
use crate::model::{ItcNet, ItcNetTape, StageTape, StageWeights, STAGE_COUNT};
use crate::optim::{AdamConfig, AdamState, LrSchedule};
use crate::rng::RngStream;
use crate::tensor::{mse_loss, Tensor};

/// Random stream ids under the run seed.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const STAGE_INIT: u64 = 100;
    pub const STAGE_SHUFFLE: u64 = 200;
    pub const STAGE_DROPOUT: u64 = 300;
    pub const FINETUNE_SHUFFLE: u64 = 400;
    pub const FINETUNE_DROPOUT: u64 = 401;
}

/// Per-epoch mean training loss and, when a validation set was given,
/// validation loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<Option<f64>>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,validation_loss\n");
        for (e, t) in self.train.iter().enumerate() {
            let v = self.validation.get(e).copied().flatten().map_or(String::new(), |v| v.to_string());
            s.push_str(&format!("{},{},{}\n", e + 1, t, v));
        }
        s
    }
}

trait Trainable {
    type Tape;
    fn forward_train(&mut self, x: &Tensor, rng: &mut RngStream) -> Result<Self::Tape>;
    fn output(tape: &Self::Tape) -> &Tensor;
    fn backward(&mut self, tape: &Self::Tape, grad: &Tensor) -> Result<()>;
    fn forward_eval(&self, x: &Tensor) -> Result<Tensor>;
    fn params(&mut self) -> Vec<(String, &mut Tensor)>;
    fn zero_grad(&mut self);
}

impl Trainable for StageWeights {
    type Tape = StageTape;

    fn forward_train(&mut self, x: &Tensor, rng: &mut RngStream) -> Result<StageTape> {
        StageWeights::forward_train(self, x, rng)
    }

    fn output(tape: &StageTape) -> &Tensor {
        tape.output()
    }

    fn backward(&mut self, tape: &StageTape, grad: &Tensor) -> Result<()> {
        StageWeights::backward(self, tape, grad).map(|_| ())
    }

    fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        StageWeights::forward_eval(self, x)
    }

    fn params(&mut self) -> Vec<(String, &mut Tensor)> {
        self.trainable_mut()
    }

    fn zero_grad(&mut self) {
        StageWeights::zero_grad(self)
    }
}

impl Trainable for ItcNet {
    type Tape = ItcNetTape;

    fn forward_train(&mut self, x: &Tensor, rng: &mut RngStream) -> Result<ItcNetTape> {
        ItcNet::forward_train(self, x, rng)
    }

    fn output(tape: &ItcNetTape) -> &Tensor {
        tape.output()
    }

    fn backward(&mut self, tape: &ItcNetTape, grad: &Tensor) -> Result<()> {
        ItcNet::backward(self, tape, grad).map(|_| ())
    }

    fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        ItcNet::forward_eval(self, x)
    }

    fn params(&mut self) -> Vec<(String, &mut Tensor)> {
        self.trainable_mut()
    }

    fn zero_grad(&mut self) {
        ItcNet::zero_grad(self)
    }
}

struct FitOptions<'a> {
    label: &'a str,
    epochs: usize,
    batch_size: usize,
    adam: AdamConfig,
    schedule: LrSchedule,
}

/// Mean per-sample MSE in inference mode.
fn eval_loss<M: Trainable>(model: &M, data: &GeiPairs, batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size) {
        let (x, y) = data.batch(chunk)?;
        let (loss, _) = mse_loss(&model.forward_eval(&x)?, &y)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

fn fit<M: Trainable>(
    model: &mut M,
    data: &GeiPairs,
    validation: Option<&GeiPairs>,
    opts: &FitOptions,
    shuffle: &mut RngStream,
    dropout: &mut RngStream,
) -> Result<LossHistory> {
    let mut adam = AdamState::new(opts.adam)?;
    let mut history = LossHistory::default();
    for epoch in 0..opts.epochs {
        let lr = opts.schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..data.len()).collect();
        shuffle.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            let (x, y) = data.batch(chunk)?;
            let tape = model.forward_train(&x, dropout)?;
            let (loss, grad) = mse_loss(M::output(&tape), &y)?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch: epoch + 1,
                    message: format!("{} loss is {loss}", opts.label),
                });
            }
            model.backward(&tape, &grad)?;
            adam.step(&mut model.params(), lr).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Training {
                    epoch: epoch + 1,
                    message: format!("{}: {e}", opts.label),
                },
                other => other,
            })?;
            model.zero_grad();
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / data.len() as f64;
        let val_loss = validation
            .filter(|v| !v.is_empty())
            .map(|v| eval_loss(model, v, opts.batch_size))
            .transpose()?;
        info!(
            "{} epoch {}/{} lr {:.1e} train {:.6} val {}",
            opts.label,
            epoch + 1,
            opts.epochs,
            lr,
            train_loss,
            val_loss.map_or("-".into(), |v| format!("{v:.6}"))
        );
        history.train.push(train_loss);
        history.validation.push(val_loss);
    }
    Ok(history)
}

/// Trains stage `stage` from a fresh He initialisation.
pub fn train_stage(
    stage: usize,
    data: &GeiPairs,
    validation: Option<&GeiPairs>,
    config: &TrainConfig,
) -> Result<(StageWeights, LossHistory)> {
    if !(1..=STAGE_COUNT).contains(&stage) {
        return Err(Error::param(format!("stage {stage} outside 1..={STAGE_COUNT}")));
    }
    if data.is_empty() {
        return Err(Error::param(format!("stage {stage} has an empty training set")));
    }
    let s = stage as u64;
    let mut init = RngStream::with_stream(config.seed, streams::STAGE_INIT + s);
    let mut weights = StageWeights::build(&config.stage, stage as u32, &mut init)?;
    let opts = FitOptions {
        label: &format!("stage {stage}"),
        epochs: config.epochs,
        batch_size: config.batch_size,
        adam: config.adam,
        schedule: config.lr,
    };
    let history = fit(
        &mut weights,
        data,
        validation,
        &opts,
        &mut RngStream::with_stream(config.seed, streams::STAGE_SHUFFLE + s),
        &mut RngStream::with_stream(config.seed, streams::STAGE_DROPOUT + s),
    )?;
    Ok((weights, history))
}

/// End-to-end training of the stacked chain. Zero epochs returns the
/// input unchanged.
pub fn finetune_itcnet(
    mut net: ItcNet,
    data: &GeiPairs,
    validation: Option<&GeiPairs>,
    config: &TrainConfig,
) -> Result<(ItcNet, LossHistory)> {
    if config.finetune_epochs == 0 {
        return Ok((net, LossHistory::default()));
    }
    if data.is_empty() {
        return Err(Error::param("fine-tuning set is empty"));
    }
    let opts = FitOptions {
        label: "finetune",
        epochs: config.finetune_epochs,
        batch_size: config.batch_size,
        adam: config.adam,
        schedule: config.finetune_lr,
    };
    let history = fit(
        &mut net,
        data,
        validation,
        &opts,
        &mut RngStream::with_stream(config.seed, streams::FINETUNE_SHUFFLE),
        &mut RngStream::with_stream(config.seed, streams::FINETUNE_DROPOUT),
    )?;
    Ok((net, history))
}

/// Mean inference-mode MSE of a trained stage or chain on `data`.
pub fn stage_loss(weights: &StageWeights, data: &GeiPairs, batch_size: usize) -> Result<f64> {
    eval_loss(weights, data, batch_size)
}

pub fn net_loss(net: &ItcNet, data: &GeiPairs, batch_size: usize) -> Result<f64> {
    eval_loss(net, data, batch_size)
}
