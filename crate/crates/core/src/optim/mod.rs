//! Adam with bias correction and a step-decay learning-rate schedule.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adam hyperparameters. `beta1` doubles as the momentum knob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.8,
            beta2: 0.99,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::param(format!(
                "adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::param("adam epsilon must be > 0 and weight decay >= 0"));
        }
        Ok(())
    }
}

/// Optimizer state. Moments are kept per slot in the order parameters are
/// passed to [`AdamState::step`]; callers must keep that order stable.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            t: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// One update from the gradients stored on each parameter.
    ///
    /// All gradients are checked before anything is written, so a
    /// non-finite gradient leaves both parameters and state untouched.
    /// Updated parameters are snapped to the f32 grid.
    pub fn step(&mut self, params: &mut [(String, &mut Tensor)], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::param(format!("learning rate must be positive, got {lr}")));
        }
        if !self.first.is_empty() && self.first.len() != params.len() {
            return Err(Error::param(format!(
                "optimizer tracks {} parameters, step got {}",
                self.first.len(),
                params.len()
            )));
        }
        for (slot, (name, p)) in params.iter().enumerate() {
            let grad = p
                .grad
                .as_ref()
                .ok_or_else(|| Error::param(format!("parameter {name} has no gradient")))?;
            if grad.len() != p.len() {
                return Err(Error::shape(format!(
                    "gradient of {name} has {} elements, parameter has {}",
                    grad.len(),
                    p.len()
                )));
            }
            if let Some(m) = self.first.get(slot) {
                if m.len() != p.len() {
                    return Err(Error::shape(format!("moment shape mismatch for {name}")));
                }
            }
            if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("{name}[{i}]")));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }

        self.t += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        for (slot, (_, p)) in params.iter_mut().enumerate() {
            let grad = p.grad.take().expect("checked above");
            let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let g = grad[i] + weight_decay * *w;
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
            p.round_to_f32();
            p.grad = Some(grad);
        }
        Ok(())
    }
}

/// Piecewise-constant decay: `initial / factor^floor(epoch / interval)`,
/// epochs counted from 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub interval: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            initial: 1e-3,
            factor: 10.0,
            interval: 5,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0) || !(self.factor >= 1.0) || self.interval == 0 {
            return Err(Error::param(format!("invalid learning-rate schedule {self:?}")));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.initial / self.factor.powi((epoch / self.interval) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn param(values: &[f64], grad: &[f64]) -> Tensor {
        let mut t = Tensor::new(&[values.len()], values.to_vec()).unwrap();
        t.grad = Some(grad.to_vec());
        t
    }

    // Independent scalar Adam; `snap` mirrors the f32 storage of weights.
    fn reference(w0: f64, grads: &[f64], lr: f64, snap: bool) -> f64 {
        let (b1, b2, eps) = (0.8f64, 0.99f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            if snap {
                w = w as f32 as f64;
            }
        }
        w
    }

    #[test]
    fn matches_scalar_reference() {
        let grads = [1.0, 1.0, -0.5, 0.25, 3.0];
        let mut p = param(&[0.5], &[0.0]);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        for (k, &g) in grads.iter().enumerate() {
            p.grad = Some(vec![g]);
            state.step(&mut [("w".into(), &mut p)], 1e-3).unwrap();
            let expected = reference(0.5, &grads[..=k], 1e-3, true);
            assert!((p.data()[0] - expected).abs() < 1e-12, "step {k}");
        }
        // snapping never moves a weight by more than half an f32 ulp per step
        let exact = reference(0.5, &grads, 1e-3, false);
        assert!((p.data()[0] - exact).abs() < 1e-7);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = param(&[0.25], &[1.0]);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        state.step(&mut [("w".into(), &mut p)], 1e-3).unwrap();
        assert_eq!(p.data()[0], reference(0.25, &[1.0], 1e-3, true));
        assert!((p.data()[0] - (0.25 - 1e-3)).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = param(&[0.5, -0.25, 1.0], &[0.0, 0.0, 0.0]);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        for _ in 0..3 {
            state.step(&mut [("w".into(), &mut p)], 1e-3).unwrap();
        }
        assert_eq!(p.data(), &[0.5, -0.25, 1.0]);
        assert_eq!(state.timestep(), 3);
    }

    #[test]
    fn bias_correction_depends_on_timestep() {
        // same params and gradient, applied at t = 1 and at t = 2
        let mut fresh = AdamState::new(AdamConfig::default()).unwrap();
        let mut aged = AdamState::new(AdamConfig::default()).unwrap();
        let mut scratch = param(&[0.5], &[0.0]);
        aged.step(&mut [("w".into(), &mut scratch)], 1e-2).unwrap();

        let mut a = param(&[0.5], &[0.3]);
        let mut b = param(&[0.5], &[0.3]);
        fresh.step(&mut [("w".into(), &mut a)], 1e-2).unwrap();
        aged.step(&mut [("w".into(), &mut b)], 1e-2).unwrap();
        assert_ne!(a.data()[0], b.data()[0]);
    }

    #[test]
    fn quadratic_converges() {
        let mut p = param(&[1.0], &[0.0]);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let mut steps = 0;
        while p.data()[0].abs() >= 1e-2 && steps < 500 {
            let w = p.data()[0];
            p.grad = Some(vec![2.0 * w]);
            state.step(&mut [("w".into(), &mut p)], 1e-2).unwrap();
            steps += 1;
        }
        assert!(p.data()[0].abs() < 1e-2, "w = {} after {steps}", p.data()[0]);
    }

    #[test]
    fn nonfinite_gradient_names_parameter() {
        let mut a = param(&[1.0], &[0.1]);
        let mut b = param(&[1.0, 2.0], &[0.0, f64::NAN]);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let err = state
            .step(&mut [("a".into(), &mut a), ("b".into(), &mut b)], 1e-3)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "b[1]"), "{err}");
        assert_eq!(a.data(), &[1.0]);
        assert_eq!(state.timestep(), 0);
    }

    #[test]
    fn rejects_bad_lr_and_missing_grad() {
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let mut p = param(&[1.0], &[0.1]);
        assert!(state.step(&mut [("w".into(), &mut p)], 0.0).is_err());
        p.grad = None;
        assert!(state.step(&mut [("w".into(), &mut p)], 1e-3).is_err());
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 1e-3);
        assert_eq!(s.lr_at(4), 1e-3);
        assert_eq!(s.lr_at(5), 1e-4);
        assert!((s.lr_at(49) - 1e-12).abs() < 1e-25);
        assert!(s.lr_at(49) > 0.0);
    }

    proptest! {
        #[test]
        fn update_is_elementwise(
            values in prop::collection::vec(-1.0f64..1.0, 2..12),
            seed in 0u64..1000,
        ) {
            let n = values.len();
            let grads: Vec<f64> = (0..n).map(|i| ((i as f64 + seed as f64) * 0.37).sin()).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            crate::rng::RngStream::new(seed).shuffle(&mut perm);

            let mut a = param(&values, &grads);
            let pv: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
            let pg: Vec<f64> = perm.iter().map(|&i| grads[i]).collect();
            let mut b = param(&pv, &pg);
            let mut sa = AdamState::new(AdamConfig::default()).unwrap();
            let mut sb = AdamState::new(AdamConfig::default()).unwrap();
            for _ in 0..3 {
                sa.step(&mut [("a".into(), &mut a)], 1e-2).unwrap();
                sb.step(&mut [("b".into(), &mut b)], 1e-2).unwrap();
            }
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(b.data()[k], a.data()[i]);
            }
        }
    }
}
