//! Input/target GEI pairs for stage training and fine-tuning.

use super::config::TrainConfig;
use crate::data::{compute_gei, tc_gei, Gei, RegisteredSequence, GEI_SIZE};
use crate::error::{Error, Result};
use crate::model::STAGE_COUNT;
use crate::tensor::Tensor;

/// Paired GEIs; `inputs[k]` is trained towards `targets[k]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeiPairs {
    pub inputs: Vec<Gei>,
    pub targets: Vec<Gei>,
}

impl GeiPairs {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Inputs and targets at `indices`, as `[B,1,64,64]` tensors.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        Ok((stack(&self.inputs, indices)?, stack(&self.targets, indices)?))
    }
}

/// GEIs at `indices` stacked into a `[B,1,64,64]` tensor.
pub fn stack(geis: &[Gei], indices: &[usize]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(indices.len() * GEI_SIZE * GEI_SIZE);
    for &i in indices {
        data.extend_from_slice(geis[i].pixels());
    }
    Tensor::new(&[indices.len(), 1, GEI_SIZE, GEI_SIZE], data)
}

/// Stage `stage` (1-based) pairs: the IC-GEI of `boundaries[stage - 1]`
/// frames against that of `boundaries[stage]` frames, sharing subject,
/// sequence and start `M = 1..=starts`. The last stage's target is the
/// sequence's complete GEI.
pub fn build_stage_dataset(sequences: &[RegisteredSequence], stage: usize, config: &TrainConfig) -> Result<GeiPairs> {
    if !(1..=STAGE_COUNT).contains(&stage) {
        return Err(Error::param(format!("stage {stage} outside 1..={STAGE_COUNT}")));
    }
    let (n_in, n_out) = (config.boundaries[stage - 1], config.boundaries[stage]);
    let mut pairs = GeiPairs::default();
    for seq in sequences {
        let tc = (n_out == seq.cycle).then(|| tc_gei(seq)).transpose()?;
        for m in 1..=config.starts {
            pairs.inputs.push(compute_gei(seq, m, n_in)?);
            pairs.targets.push(match &tc {
                Some(tc) => tc.clone(),
                None => compute_gei(seq, m, n_out)?,
            });
        }
    }
    Ok(pairs)
}

/// Every IC-GEI type in `counts` over `starts` offsets, each paired with
/// its sequence's complete GEI.
pub fn build_complete_dataset(sequences: &[RegisteredSequence], counts: &[usize], starts: usize) -> Result<GeiPairs> {
    let mut pairs = GeiPairs::default();
    for seq in sequences {
        let tc = tc_gei(seq)?;
        for &n in counts {
            for m in 1..=starts {
                pairs.inputs.push(compute_gei(seq, m, n)?);
                pairs.targets.push(tc.clone());
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_walker, Role, WalkerParams};
    use crate::rng::RngStream;

    fn sequences(n: usize, cycle: usize, frames: usize) -> Vec<RegisteredSequence> {
        let mut rng = RngStream::new(5);
        (0..n)
            .map(|i| {
                let p = WalkerParams::sample(cycle, &mut rng);
                let s = synth_walker(&p, frames, &format!("s{i}"), "g", Role::Gallery).unwrap();
                RegisteredSequence::register(&s).unwrap()
            })
            .collect()
    }

    #[test]
    fn oulp_first_and_last_stage() {
        let cfg = TrainConfig::paper();
        let seqs = sequences(1, 30, 33);
        let first = build_stage_dataset(&seqs, 1, &cfg).unwrap();
        assert_eq!(first.len(), 14);
        assert!(first.inputs.iter().all(|g| g.count == 1));
        assert!(first.targets.iter().all(|g| g.count == 3));
        let last = build_stage_dataset(&seqs, 9, &cfg).unwrap();
        assert!(last.inputs.iter().all(|g| g.count == 20));
        assert!(last.targets.iter().all(|g| g.count == 30 && g.complete));
    }

    #[test]
    fn pairs_share_provenance() {
        let cfg = TrainConfig::desk();
        let seqs = sequences(3, 20, 40);
        for stage in 1..=9 {
            let d = build_stage_dataset(&seqs, stage, &cfg).unwrap();
            assert_eq!(d.inputs.len(), d.targets.len());
            assert_eq!(d.len(), 3 * cfg.starts);
            for (x, y) in d.inputs.iter().zip(&d.targets) {
                assert_eq!((&x.subject, &x.sequence), (&y.subject, &y.sequence));
                if !y.complete {
                    assert_eq!(x.start, y.start);
                }
                assert_eq!((x.count, y.count), (cfg.boundaries[stage - 1], cfg.boundaries[stage]));
            }
        }
    }

    #[test]
    fn out_of_range_stage_or_short_sequence() {
        let cfg = TrainConfig::paper();
        let seqs = sequences(1, 30, 30);
        assert!(build_stage_dataset(&seqs, 0, &cfg).is_err());
        assert!(build_stage_dataset(&seqs, 10, &cfg).is_err());
        assert!(build_stage_dataset(&seqs, 9, &cfg).is_err());
    }

    #[test]
    fn complete_dataset_targets_are_tc() {
        let seqs = sequences(2, 20, 40);
        let d = build_complete_dataset(&seqs, &[1, 4, 18], 2).unwrap();
        assert_eq!(d.len(), 2 * 3 * 2);
        assert!(d.targets.iter().all(|g| g.complete && g.count == 20));
        let (x, y) = d.batch(&[0, 5]).unwrap();
        assert_eq!(x.shape(), &[2, 1, 64, 64]);
        assert_eq!(&y.data()[..4096], d.targets[0].pixels());
    }
}
