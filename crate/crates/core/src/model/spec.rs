use crate::error::{Error, Result};

/// Shape of one convolution in the stage network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvLayerSpec {
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }
}

/// Architecture of one stage autoencoder.
///
/// Encoder: three `conv -> relu -> maxpool -> batchnorm -> dropout` blocks.
/// Decoder: three `upsample -> conv -> relu -> batchnorm -> dropout` blocks.
/// Output: `conv -> sigmoid` to a single channel.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSpec {
    /// Side of the square single-channel input.
    pub input_size: usize,
    pub encoder_channels: [usize; 3],
    pub decoder_channels: [usize; 3],
    /// Spatial filter size (`fw = fh`).
    pub kernel_size: usize,
    /// Temporal filter extent `ft`; 1 for 2D images.
    pub time_extent: usize,
    pub dropout: f64,
}

impl Default for StageSpec {
    fn default() -> Self {
        StageSpec {
            input_size: 64,
            encoder_channels: [128, 64, 32],
            decoder_channels: [64, 128, 128],
            kernel_size: 4,
            time_extent: 1,
            dropout: 0.5,
        }
    }
}

impl StageSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::param(format!(
                "input size {} must be a positive multiple of 8",
                self.input_size
            )));
        }
        if self.kernel_size == 0 || self.time_extent == 0 {
            return Err(Error::param("kernel size and time extent must be positive"));
        }
        if self
            .encoder_channels
            .iter()
            .chain(&self.decoder_channels)
            .any(|&c| c == 0)
        {
            return Err(Error::param("channel counts must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// The seven convolutions in forward order: 3 encoder, 3 decoder, output.
    pub fn conv_layers(&self) -> Vec<ConvLayerSpec> {
        let k = self.kernel_size;
        let mut layers = Vec::with_capacity(7);
        let mut prev = 1;
        for &c in self.encoder_channels.iter().chain(&self.decoder_channels) {
            layers.push(ConvLayerSpec {
                in_channels: prev,
                out_channels: c,
                kernel: k,
            });
            prev = c;
        }
        layers.push(ConvLayerSpec {
            in_channels: prev,
            out_channels: 1,
            kernel: k,
        });
        layers
    }

    /// He-style standard deviation `sqrt(2 / (fw * fh * ft * fd))`, where
    /// `fd` is the number of filters in the layer.
    pub fn init_std(&self, layer: &ConvLayerSpec) -> f64 {
        let fan = layer.kernel * layer.kernel * self.time_extent * layer.out_channels;
        (2.0 / fan as f64).sqrt()
    }

    /// `(channels, height, width)` after every stage of the network, starting
    /// with the input.
    pub fn shape_trace(&self) -> Vec<(&'static str, [usize; 3])> {
        let s = self.input_size;
        let [e1, e2, e3] = self.encoder_channels;
        let [d1, d2, d3] = self.decoder_channels;
        vec![
            ("input", [1, s, s]),
            ("enc1.conv", [e1, s, s]),
            ("enc1.pool", [e1, s / 2, s / 2]),
            ("enc2.conv", [e2, s / 2, s / 2]),
            ("enc2.pool", [e2, s / 4, s / 4]),
            ("enc3.conv", [e3, s / 4, s / 4]),
            ("enc3.pool", [e3, s / 8, s / 8]),
            ("dec1.upsample", [e3, s / 4, s / 4]),
            ("dec1.conv", [d1, s / 4, s / 4]),
            ("dec2.upsample", [d1, s / 2, s / 2]),
            ("dec2.conv", [d2, s / 2, s / 2]),
            ("dec3.upsample", [d2, s, s]),
            ("dec3.conv", [d3, s, s]),
            ("output", [1, s, s]),
        ]
    }

    /// Trainable scalars: conv weights and biases plus batch-norm gamma/beta.
    pub fn parameter_count(&self) -> usize {
        let layers = self.conv_layers();
        let convs: usize = layers
            .iter()
            .map(|l| l.weight_shape().iter().product::<usize>() + l.out_channels)
            .sum();
        let bn: usize = layers[..6].iter().map(|l| 2 * l.out_channels).sum();
        convs + bn
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_architecture() {
        let s = StageSpec::default();
        s.validate().unwrap();
        let trace = s.shape_trace();
        let sizes: Vec<usize> = trace.iter().map(|(_, d)| d[1]).collect();
        assert_eq!(sizes, [64, 64, 32, 32, 16, 16, 8, 16, 16, 32, 32, 64, 64, 64]);
        assert_eq!(trace.last().unwrap().1, [1, 64, 64]);
    }

    #[test]
    fn first_layer_init_std() {
        let s = StageSpec::default();
        let first = s.conv_layers()[0];
        assert_eq!(first.weight_shape(), [128, 1, 4, 4]);
        assert!((s.init_std(&first) - (2.0f64 / 2048.0).sqrt()).abs() < 1e-15);
        assert!((s.init_std(&first) - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn parameter_count_is_pinned() {
        // conv1 2048+128, conv2 131072+64, conv3 32768+32,
        // dec 32768+64, 131072+128, 262144+128, out 2048+1, bn 2*(128+64+32+64+128+128)
        assert_eq!(StageSpec::default().parameter_count(), 595_553);
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut s = StageSpec::default();
        s.input_size = 60;
        assert!(s.validate().is_err());
        let mut s = StageSpec::default();
        s.dropout = 1.0;
        assert!(s.validate().is_err());
    }
}
