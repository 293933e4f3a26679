use super::spec::{ConvLayerSpec, StageSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{
    batchnorm, batchnorm_backward, batchnorm_eval, conv2d, conv2d_backward, dropout,
    dropout_backward, maxpool2x2, maxpool2x2_backward, relu, relu_backward, sigmoid,
    sigmoid_backward, upsample_nearest2x, upsample_nearest2x_backward, BatchNormCache,
    DropoutMask, Mode, PadSpec, Tensor,
};

/// A convolution followed by batch normalisation, with its running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub weight: Tensor,
    pub bias: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

impl ConvBlock {
    fn init(layer: &ConvLayerSpec, std: f64, rng: &mut RngStream) -> Self {
        let mut weight = Tensor::from_fn(&layer.weight_shape(), |_| rng.normal(0.0, std));
        weight.round_to_f32();
        let c = layer.out_channels;
        ConvBlock {
            weight,
            bias: Tensor::zeros(&[c]),
            gamma: Tensor::filled(&[c], 1.0),
            beta: Tensor::zeros(&[c]),
            running_mean: Tensor::zeros(&[c]),
            running_var: Tensor::filled(&[c], 1.0),
        }
    }

    fn bn_eval(&self, x: &Tensor) -> Result<Tensor> {
        batchnorm_eval(x, &self.gamma, &self.beta, &self.running_mean, &self.running_var)
    }

    fn bn_train(&mut self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        let out = batchnorm(
            x,
            &self.gamma,
            &self.beta,
            &mut self.running_mean,
            &mut self.running_var,
        )?;
        self.running_mean.round_to_f32();
        self.running_var.round_to_f32();
        Ok(out)
    }
}

/// Parameters of one stage autoencoder. `index` is the stage's 1-based
/// position in the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct StageWeights {
    pub index: u32,
    pub spec: StageSpec,
    pub encoder: Vec<ConvBlock>,
    pub decoder: Vec<ConvBlock>,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
}

struct EncoderTape {
    input: Tensor,
    pre_activation: Tensor,
    argmax: Vec<usize>,
    bn: BatchNormCache,
    mask: Option<DropoutMask>,
}

struct DecoderTape {
    /// Block input before upsampling.
    input: Tensor,
    pre_activation: Tensor,
    bn: BatchNormCache,
    mask: Option<DropoutMask>,
}

/// Activations recorded by a training-mode forward pass.
pub struct StageTape {
    encoder: Vec<EncoderTape>,
    decoder: Vec<DecoderTape>,
    out_input: Tensor,
    output: Tensor,
}

impl StageTape {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

impl StageWeights {
    /// He-initialised weights, zero biases, identity batch norm.
    pub fn build(spec: &StageSpec, index: u32, rng: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let layers = spec.conv_layers();
        let mut blocks: Vec<ConvBlock> = layers[..6]
            .iter()
            .map(|l| ConvBlock::init(l, spec.init_std(l), rng))
            .collect();
        let decoder = blocks.split_off(3);
        let out = &layers[6];
        let std = spec.init_std(out);
        let mut out_weight = Tensor::from_fn(&out.weight_shape(), |_| rng.normal(0.0, std));
        out_weight.round_to_f32();
        Ok(StageWeights {
            index,
            spec: spec.clone(),
            encoder: blocks,
            decoder,
            out_weight,
            out_bias: Tensor::zeros(&[1]),
        })
    }

    fn pad(&self) -> PadSpec {
        PadSpec::same(self.spec.kernel_size, self.spec.kernel_size)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        let s = self.spec.input_size;
        if (c, h, w) != (1, s, s) {
            return Err(Error::shape(format!(
                "stage {} expects [B,1,{s},{s}], got {:?}",
                self.index,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Every tensor in checkpoint order, with its name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        let blocks = self
            .encoder
            .iter()
            .enumerate()
            .map(|(i, b)| (format!("enc{}", i + 1), b))
            .chain(
                self.decoder
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (format!("dec{}", i + 1), b)),
            );
        for (prefix, b) in blocks {
            out.push((format!("{prefix}.conv.weight"), &b.weight));
            out.push((format!("{prefix}.conv.bias"), &b.bias));
            out.push((format!("{prefix}.bn.gamma"), &b.gamma));
            out.push((format!("{prefix}.bn.beta"), &b.beta));
            out.push((format!("{prefix}.bn.running_mean"), &b.running_mean));
            out.push((format!("{prefix}.bn.running_var"), &b.running_var));
        }
        out.push(("out.conv.weight".into(), &self.out_weight));
        out.push(("out.conv.bias".into(), &self.out_bias));
        out
    }

    /// Trainable tensors (everything except running statistics).
    pub fn trainable_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        let idx = self.index;
        for (kind, blocks) in [("enc", &mut self.encoder), ("dec", &mut self.decoder)] {
            for (i, b) in blocks.iter_mut().enumerate() {
                let p = format!("stage{idx}/{kind}{}", i + 1);
                out.push((format!("{p}.conv.weight"), &mut b.weight));
                out.push((format!("{p}.conv.bias"), &mut b.bias));
                out.push((format!("{p}.bn.gamma"), &mut b.gamma));
                out.push((format!("{p}.bn.beta"), &mut b.beta));
            }
        }
        out.push((format!("stage{idx}/out.conv.weight"), &mut self.out_weight));
        out.push((format!("stage{idx}/out.conv.bias"), &mut self.out_bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        let stats: usize = self
            .encoder
            .iter()
            .chain(&self.decoder)
            .map(|b| b.running_mean.len() + b.running_var.len())
            .sum();
        self.named_tensors().iter().map(|(_, t)| t.len()).sum::<usize>() - stats
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks every tensor shape against `spec`.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let layers = self.spec.conv_layers();
        if self.encoder.len() != 3 || self.decoder.len() != 3 {
            return Err(Error::shape("stage needs 3 encoder and 3 decoder blocks"));
        }
        for (b, l) in self.encoder.iter().chain(&self.decoder).zip(&layers) {
            let c = [l.out_channels];
            let ok = b.weight.shape() == l.weight_shape()
                && [&b.bias, &b.gamma, &b.beta, &b.running_mean, &b.running_var]
                    .iter()
                    .all(|t| t.shape() == c);
            if !ok {
                return Err(Error::shape(format!(
                    "stage {}: block tensors do not match {l:?}",
                    self.index
                )));
            }
        }
        if self.out_weight.shape() != layers[6].weight_shape() || self.out_bias.shape() != [1] {
            return Err(Error::shape(format!("stage {}: output layer shape", self.index)));
        }
        Ok(())
    }

    /// Inference forward pass.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let pad = self.pad();
        let mut h = x.clone();
        for b in &self.encoder {
            let a = relu(&conv2d(&h, &b.weight, &b.bias, pad)?);
            let (p, _) = maxpool2x2(&a)?;
            h = b.bn_eval(&p)?;
        }
        for b in &self.decoder {
            let u = upsample_nearest2x(&h)?;
            let a = relu(&conv2d(&u, &b.weight, &b.bias, pad)?);
            h = b.bn_eval(&a)?;
        }
        Ok(sigmoid(&conv2d(&h, &self.out_weight, &self.out_bias, pad)?))
    }

    /// Training forward pass: batch statistics, running-stat updates, dropout
    /// drawn from `rng`. Returns the tape needed by [`Self::backward`].
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut RngStream) -> Result<StageTape> {
        self.check_input(x)?;
        let pad = self.pad();
        let p = self.spec.dropout;
        let mut h = x.clone();
        let mut enc = Vec::with_capacity(3);
        for b in &mut self.encoder {
            let pre = conv2d(&h, &b.weight, &b.bias, pad)?;
            let (pooled, argmax) = maxpool2x2(&relu(&pre))?;
            let (normed, bn) = b.bn_train(&pooled)?;
            let (out, mask) = dropout(&normed, p, Mode::Train, rng)?;
            enc.push(EncoderTape {
                input: std::mem::replace(&mut h, out),
                pre_activation: pre,
                argmax,
                bn,
                mask,
            });
        }
        let mut dec = Vec::with_capacity(3);
        for b in &mut self.decoder {
            let pre = conv2d(&upsample_nearest2x(&h)?, &b.weight, &b.bias, pad)?;
            let (normed, bn) = b.bn_train(&relu(&pre))?;
            let (out, mask) = dropout(&normed, p, Mode::Train, rng)?;
            dec.push(DecoderTape {
                input: std::mem::replace(&mut h, out),
                pre_activation: pre,
                bn,
                mask,
            });
        }
        let output = sigmoid(&conv2d(&h, &self.out_weight, &self.out_bias, pad)?);
        Ok(StageTape {
            encoder: enc,
            decoder: dec,
            out_input: h,
            output,
        })
    }

    /// Convenience wrapper with an explicit mode; the tape is discarded.
    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut RngStream) -> Result<Tensor> {
        match mode {
            Mode::Eval => self.forward_eval(x),
            Mode::Train => Ok(self.forward_train(x, rng)?.output),
        }
    }

    /// Backpropagate `grad_out` (gradient w.r.t. the stage output) through
    /// the recorded tape. Parameter gradients are accumulated into each
    /// tensor's `grad` slot; the gradient w.r.t. the stage input is returned.
    pub fn backward(&mut self, tape: &StageTape, grad_out: &Tensor) -> Result<Tensor> {
        let pad = self.pad();
        let g = sigmoid_backward(&tape.output, grad_out)?;
        let cg = conv2d_backward(&tape.out_input, &self.out_weight, pad, &g)?;
        self.out_weight.accumulate_grad(cg.kernel.data());
        self.out_bias.accumulate_grad(cg.bias.data());
        let mut g = cg.input;

        for (b, t) in self.decoder.iter_mut().zip(&tape.decoder).rev() {
            let gd = dropout_backward(t.mask.as_ref(), &g)?;
            let bn = batchnorm_backward(&t.bn, &b.gamma, &gd)?;
            b.gamma.accumulate_grad(bn.gamma.data());
            b.beta.accumulate_grad(bn.beta.data());
            let ga = relu_backward(&t.pre_activation, &bn.input)?;
            let cg = conv2d_backward(&upsample_nearest2x(&t.input)?, &b.weight, pad, &ga)?;
            b.weight.accumulate_grad(cg.kernel.data());
            b.bias.accumulate_grad(cg.bias.data());
            g = upsample_nearest2x_backward(&cg.input)?;
        }
        for (b, t) in self.encoder.iter_mut().zip(&tape.encoder).rev() {
            let gd = dropout_backward(t.mask.as_ref(), &g)?;
            let bn = batchnorm_backward(&t.bn, &b.gamma, &gd)?;
            b.gamma.accumulate_grad(bn.gamma.data());
            b.beta.accumulate_grad(bn.beta.data());
            let gp = maxpool2x2_backward(&bn.input, &t.argmax, t.pre_activation.shape())?;
            let ga = relu_backward(&t.pre_activation, &gp)?;
            let cg = conv2d_backward(&t.input, &b.weight, pad, &ga)?;
            b.weight.accumulate_grad(cg.kernel.data());
            b.bias.accumulate_grad(cg.bias.data());
            g = cg.input;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for (_, t) in self.trainable_mut() {
            t.zero_grad();
        }
    }
}
