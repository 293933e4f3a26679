//! End-to-end orchestration: generate or load sequences, split by subject,
//! train the nine stages, stack, fine-tune and evaluate.

use log::info;

use super::config::TrainConfig;
use super::dataset::{build_complete_dataset, build_stage_dataset};
use super::eval::{evaluate_reconstruction, evaluate_recognition, RecogReport, ReconReport};
use super::train::{finetune_itcnet, streams, train_stage, LossHistory};
use crate::data::{split_dataset, synth_walker, DatasetSplit, RegisteredSequence, Role, SilhouetteSequence, WalkerParams};
use crate::error::{Error, Result};
use crate::model::{stack_itcnet, ItcNet, STAGE_COUNT};
use crate::parallel::map_indexed;
use crate::rng::RngStream;

pub fn subject_id(i: usize) -> String {
    format!("s{:03}", i + 1)
}

/// One gallery and one probe walker per subject. The two sequences share
/// the subject's body and gait, each with its own small jitter and phase.
pub fn generate_walkers(config: &TrainConfig) -> Result<Vec<SilhouetteSequence>> {
    let mut rng = RngStream::with_stream(config.seed, streams::DATA);
    let mut params = Vec::with_capacity(2 * config.subjects);
    for i in 0..config.subjects {
        let base = WalkerParams::sample(config.cycle, &mut rng);
        let subject = subject_id(i);
        params.push((subject.clone(), "g", Role::Gallery, base.jittered(config.jitter, &mut rng)));
        params.push((subject, "p", Role::Probe, base.jittered(config.jitter, &mut rng)));
    }
    map_indexed(params.len(), |k| {
        let (subject, seq, role, p) = &params[k];
        synth_walker(p, config.frames, subject, seq, *role)
    })
    .into_iter()
    .collect()
}

pub fn register_all(sequences: &[SilhouetteSequence]) -> Result<Vec<RegisteredSequence>> {
    map_indexed(sequences.len(), |k| {
        RegisteredSequence::register(&sequences[k]).map_err(|e| match e {
            Error::Ingest { frame, message } => Error::Ingest {
                frame,
                message: format!("{}/{}: {message}", sequences[k].subject, sequences[k].sequence),
            },
            other => other,
        })
    })
    .into_iter()
    .collect()
}

/// Registered sequences partitioned by a subject-disjoint split.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub split: DatasetSplit,
    pub train: Vec<RegisteredSequence>,
    pub validation: Vec<RegisteredSequence>,
    pub test: Vec<RegisteredSequence>,
}

impl Prepared {
    pub fn new(sequences: Vec<RegisteredSequence>, config: &TrainConfig) -> Result<Self> {
        if let Some(s) = sequences.iter().find(|s| s.cycle != config.cycle) {
            return Err(Error::Config(format!(
                "sequence {}/{} has cycle {} but the configuration expects {}",
                s.subject, s.sequence, s.cycle, config.cycle
            )));
        }
        let subjects: Vec<String> = sequences.iter().map(|s| s.subject.clone()).collect();
        let split = split_dataset(&subjects, config.split, config.seed)?;
        let mut p = Prepared {
            split,
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for s in sequences {
            if p.split.train.contains(&s.subject) {
                p.train.push(s);
            } else if p.split.validation.contains(&s.subject) {
                p.validation.push(s);
            } else {
                p.test.push(s);
            }
        }
        Ok(p)
    }

    pub fn test_role(&self, role: Role) -> Vec<RegisteredSequence> {
        self.test.iter().filter(|s| s.role == role).cloned().collect()
    }
}

/// Trains stage `stage` on the training part, reporting validation loss.
pub fn train_one_stage(
    prepared: &Prepared,
    stage: usize,
    config: &TrainConfig,
) -> Result<(crate::model::StageWeights, LossHistory)> {
    let data = build_stage_dataset(&prepared.train, stage, config)?;
    let val = build_stage_dataset(&prepared.validation, stage, config)?;
    info!("stage {stage}: {} training pairs, {} validation pairs", data.len(), val.len());
    train_stage(stage, &data, Some(&val), config)
}

/// Fine-tuning pairs: every stage input type against the complete GEI.
pub fn finetune_net(net: ItcNet, prepared: &Prepared, config: &TrainConfig) -> Result<(ItcNet, LossHistory)> {
    let counts = &config.boundaries[..STAGE_COUNT];
    let data = build_complete_dataset(&prepared.train, counts, config.finetune_starts)?;
    let val = build_complete_dataset(&prepared.validation, counts, 1)?;
    info!("finetune: {} training pairs, {} validation pairs", data.len(), val.len());
    finetune_itcnet(net, &data, Some(&val), config)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub split: DatasetSplit,
    pub net: ItcNet,
    pub stage_histories: Vec<LossHistory>,
    pub finetune_history: LossHistory,
    pub recon: ReconReport,
    pub recog: RecogReport,
}

/// The whole procedure on already registered sequences.
pub fn run_on(sequences: Vec<RegisteredSequence>, config: &TrainConfig) -> Result<RunOutcome> {
    config.validate()?;
    let prepared = Prepared::new(sequences, config)?;
    let mut stages = Vec::with_capacity(STAGE_COUNT);
    let mut stage_histories = Vec::with_capacity(STAGE_COUNT);
    for stage in 1..=STAGE_COUNT {
        let (w, h) = train_one_stage(&prepared, stage, config)?;
        stages.push(w);
        stage_histories.push(h);
    }
    let net = stack_itcnet(stages, config.cycle)?;
    let (net, finetune_history) = finetune_net(net, &prepared, config)?;
    let recon = evaluate_reconstruction(&net, &prepared.test, config)?;
    let recog = evaluate_recognition(
        &net,
        &prepared.test_role(Role::Gallery),
        &prepared.test_role(Role::Probe),
        config,
    )?;
    Ok(RunOutcome {
        split: prepared.split,
        net,
        stage_histories,
        finetune_history,
        recon,
        recog,
    })
}

/// Generates synthetic walkers from the configuration and runs everything.
pub fn run_synthetic(config: &TrainConfig) -> Result<RunOutcome> {
    config.validate()?;
    let sequences = register_all(&generate_walkers(config)?)?;
    run_on(sequences, config)
}

/// Runs `f` inside a rayon pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        let mut c = TrainConfig::desk();
        c.subjects = 20;
        c.epochs = 1;
        c.finetune_epochs = 1;
        c.starts = 1;
        c.finetune_starts = 1;
        c.eval_starts = 1;
        c.eval_counts = vec![1, 10];
        c.stage.encoder_channels = [2, 2, 2];
        c.stage.decoder_channels = [2, 2, 2];
        c
    }

    #[test]
    fn walkers_are_deterministic_and_paired() {
        let c = tiny();
        let a = generate_walkers(&c).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a[0].subject, a[1].subject);
        assert_eq!((a[0].role, a[1].role), (Role::Gallery, Role::Probe));
        assert_ne!(a[0].frames(), a[1].frames());
        assert_eq!(a, generate_walkers(&c).unwrap());
    }

    #[test]
    fn prepared_parts_are_subject_disjoint() {
        let c = tiny();
        let p = Prepared::new(register_all(&generate_walkers(&c).unwrap()).unwrap(), &c).unwrap();
        assert_eq!((p.train.len(), p.validation.len(), p.test.len()), (32, 4, 4));
        for s in &p.test {
            assert!(p.train.iter().all(|t| t.subject != s.subject));
        }
        assert_eq!(p.test_role(Role::Probe).len(), 2);
    }

    #[test]
    fn tiny_run_completes_and_is_repeatable() {
        let c = tiny();
        let a = run_synthetic(&c).unwrap();
        assert_eq!(a.stage_histories.len(), 9);
        assert_eq!(a.recon.rows.len(), 2);
        assert_eq!(a.recog.rows.len(), 6);
        let b = run_synthetic(&c).unwrap();
        assert_eq!(a.recon, b.recon);
        assert_eq!(a.recog, b.recog);
        assert_eq!(a.finetune_history, b.finetune_history);
    }

    #[test]
    fn cycle_mismatch_is_a_config_error() {
        let mut c = tiny();
        let seqs = register_all(&generate_walkers(&c).unwrap()).unwrap();
        c.cycle = 30;
        assert!(matches!(Prepared::new(seqs, &c), Err(Error::Config(_))));
    }
}
