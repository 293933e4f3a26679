use super::stage::{StageTape, StageWeights};
use super::Reconstructor;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Mode, Tensor};

pub const STAGE_COUNT: usize = 9;

/// Nine stage autoencoders chained end to end. Stage `i` was trained to lift
/// a GEI from one coverage boundary of the gait cycle to the next; the chain
/// maps any incomplete GEI towards the complete one.
#[derive(Clone, Debug, PartialEq)]
pub struct ItcNet {
    stages: Vec<StageWeights>,
    cycle_length: usize,
}

/// Per-stage tapes of a training-mode chain forward.
pub struct ItcNetTape {
    stages: Vec<StageTape>,
}

impl ItcNetTape {
    pub fn output(&self) -> &Tensor {
        self.stages.last().expect("non-empty chain").output()
    }
}

/// Chain trained stages in index order. Indices must be exactly `1..=9` and
/// all stages must share one architecture.
pub fn stack_itcnet(mut stages: Vec<StageWeights>, cycle_length: usize) -> Result<ItcNet> {
    if stages.len() != STAGE_COUNT {
        return Err(Error::param(format!(
            "an ItcNet needs exactly {STAGE_COUNT} stages, got {}",
            stages.len()
        )));
    }
    if cycle_length == 0 {
        return Err(Error::param("cycle length must be positive"));
    }
    stages.sort_by_key(|s| s.index);
    for (pos, s) in stages.iter().enumerate() {
        if s.index as usize != pos + 1 {
            return Err(Error::param(format!(
                "stage indices must be 1..={STAGE_COUNT}; found {} at position {}",
                s.index,
                pos + 1
            )));
        }
        s.validate()?;
        if s.spec != stages[0].spec {
            return Err(Error::param(format!(
                "stage {} has a different architecture from stage 1",
                s.index
            )));
        }
    }
    Ok(ItcNet {
        stages,
        cycle_length,
    })
}

impl ItcNet {
    pub fn stages(&self) -> &[StageWeights] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [StageWeights] {
        &mut self.stages
    }

    pub fn into_stages(self) -> Vec<StageWeights> {
        self.stages
    }

    pub fn cycle_length(&self) -> usize {
        self.cycle_length
    }

    /// Frames of the cycle covered by one stage transition, `T / 10`.
    pub fn stage_stride(&self) -> f64 {
        self.cycle_length as f64 / 10.0
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.stages[0].forward_eval(x)?;
        for s in &self.stages[1..] {
            h = s.forward_eval(&h)?;
        }
        Ok(h)
    }

    pub fn forward_train(&mut self, x: &Tensor, rng: &mut RngStream) -> Result<ItcNetTape> {
        let mut tapes: Vec<StageTape> = Vec::with_capacity(STAGE_COUNT);
        for s in &mut self.stages {
            let input = tapes.last().map(|t| t.output()).unwrap_or(x);
            let tape = s.forward_train(input, rng)?;
            tapes.push(tape);
        }
        Ok(ItcNetTape { stages: tapes })
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut RngStream) -> Result<Tensor> {
        match mode {
            Mode::Eval => self.forward_eval(x),
            Mode::Train => Ok(self.forward_train(x, rng)?.output().clone()),
        }
    }

    /// Backpropagate through all stages, last to first.
    pub fn backward(&mut self, tape: &ItcNetTape, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for (s, t) in self.stages.iter_mut().zip(&tape.stages).rev() {
            g = s.backward(t, &g)?;
        }
        Ok(g)
    }

    pub fn trainable_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.trainable_mut())
            .collect()
    }

    pub fn zero_grad(&mut self) {
        self.stages.iter_mut().for_each(|s| s.zero_grad());
    }

    pub fn is_finite(&self) -> bool {
        self.stages.iter().all(|s| s.is_finite())
    }
}

impl Reconstructor for ItcNet {
    fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward_eval(batch)
    }
}

impl Reconstructor for StageWeights {
    fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward_eval(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StageSpec;

    fn tiny() -> StageSpec {
        StageSpec {
            input_size: 16,
            encoder_channels: [2, 2, 2],
            decoder_channels: [2, 2, 2],
            ..StageSpec::default()
        }
    }

    fn stages(n: u32) -> Vec<StageWeights> {
        let mut rng = RngStream::new(0);
        (1..=n)
            .map(|i| StageWeights::build(&tiny(), i, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn stacking_preserves_order() {
        let s = stages(9);
        let net = stack_itcnet(s.clone(), 30).unwrap();
        assert_eq!(net.stages(), &s[..]);
        assert_eq!(net.stage_stride(), 3.0);
    }

    #[test]
    fn stacking_sorts_by_index() {
        let mut s = stages(9);
        s.reverse();
        let net = stack_itcnet(s, 20).unwrap();
        let idx: Vec<u32> = net.stages().iter().map(|s| s.index).collect();
        assert_eq!(idx, (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_stage_count() {
        assert!(matches!(stack_itcnet(stages(8), 20), Err(Error::Param(_))));
        let mut s = stages(9);
        s[4].index = 3;
        assert!(stack_itcnet(s, 20).is_err());
    }

    #[test]
    fn chain_equals_sequential_stages() {
        let s = stages(9);
        let net = stack_itcnet(s.clone(), 20).unwrap();
        let mut rng = RngStream::new(1);
        let x = Tensor::from_fn(&[2, 1, 16, 16], |_| rng.uniform());
        let mut h = x.clone();
        for st in &s {
            h = st.forward_eval(&h).unwrap();
        }
        let y = net.forward_eval(&x).unwrap();
        for (a, b) in y.data().iter().zip(h.data()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}
