//! Run configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{fnv1a64, StageSpec, STAGE_COUNT};
use crate::optim::{AdamConfig, LrSchedule};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    /// Gait-cycle length `T`.
    pub cycle: usize,
    /// Synthetic subjects generated by `gen-data`.
    pub subjects: usize,
    /// Frames rendered per synthetic sequence.
    pub frames: usize,
    /// Relative per-walk jitter of synthetic body proportions.
    pub jitter: f64,
    /// Train / validation / test fractions of subjects.
    pub split: [f64; 3],
    /// Ten frame counts; stage `i` maps `boundaries[i - 1]` to `boundaries[i]`.
    pub boundaries: Vec<usize>,
    /// Frame counts used for fine-tuning inputs and evaluation rows.
    pub eval_counts: Vec<usize>,
    /// Start offsets per sequence for stage training.
    pub starts: usize,
    /// Start offsets per sequence for fine-tuning.
    pub finetune_starts: usize,
    /// Start offsets per sequence for evaluation.
    pub eval_starts: usize,
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub lr: LrSchedule,
    pub finetune_lr: LrSchedule,
    pub stage: StageSpec,
    pub recon_threshold: f64,
    pub threads: usize,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// `{1} ∪ {round(k T / 10) : k = 1..8} ∪ {T}`, deduplicated.
pub fn default_boundaries(cycle: usize) -> Vec<usize> {
    let mut b = vec![1];
    for k in 1..=8 {
        b.push(((k * cycle) as f64 / 10.0).round() as usize);
    }
    b.push(cycle);
    b.retain(|&n| n >= 1);
    b.dedup();
    b
}

impl TrainConfig {
    /// Full-size settings: OULP-style cycle of 30 frames, 14 starts,
    /// 50 epochs of batch 80 and the full channel widths.
    pub fn paper() -> Self {
        TrainConfig {
            seed: 0,
            cycle: 30,
            subjects: 3254,
            frames: 43,
            jitter: 0.03,
            split: [2254.0 / 3254.0, 500.0 / 3254.0, 500.0 / 3254.0],
            boundaries: vec![1, 3, 5, 8, 10, 13, 15, 18, 20, 30],
            eval_counts: vec![1, 3, 5, 8, 10, 13, 15, 18, 20],
            starts: 14,
            finetune_starts: 14,
            eval_starts: 14,
            epochs: 50,
            finetune_epochs: 50,
            batch_size: 80,
            adam: AdamConfig::default(),
            lr: LrSchedule::default(),
            finetune_lr: LrSchedule::default(),
            stage: StageSpec::default(),
            recon_threshold: 0.08,
            threads: 1,
            data_dir: None,
            out_dir: None,
        }
    }

    /// Settings that train end to end on one CPU core in minutes:
    /// 40 synthetic subjects, T = 20, narrow stages and few epochs.
    pub fn desk() -> Self {
        let cycle = 20;
        TrainConfig {
            seed: 0,
            cycle,
            subjects: 40,
            frames: 2 * cycle,
            jitter: 0.03,
            split: [0.8, 0.1, 0.1],
            boundaries: default_boundaries(cycle),
            eval_counts: vec![1, 2, 4, 6, 8, 10, 12, 14, 16, 18],
            starts: 2,
            finetune_starts: 4,
            eval_starts: 3,
            epochs: 20,
            finetune_epochs: 4,
            batch_size: 2,
            adam: AdamConfig::default(),
            lr: LrSchedule {
                initial: 0.01,
                interval: 10,
                ..LrSchedule::default()
            },
            finetune_lr: LrSchedule {
                interval: 2,
                ..LrSchedule::default()
            },
            stage: StageSpec {
                encoder_channels: [8, 16, 32],
                decoder_channels: [16, 8, 8],
                dropout: 0.0,
                ..StageSpec::default()
            },
            recon_threshold: 0.08,
            threads: 1,
            data_dir: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.cycle == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("cycle, batch_size and epochs must be at least 1".into());
        }
        if self.boundaries.len() != STAGE_COUNT + 1 {
            return bad(format!(
                "boundaries need {} frame counts for {STAGE_COUNT} stages, got {}",
                STAGE_COUNT + 1,
                self.boundaries.len()
            ));
        }
        if self.boundaries[0] < 1 || self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("boundaries {:?} must be strictly increasing from >= 1", self.boundaries));
        }
        if *self.boundaries.last().unwrap() != self.cycle {
            return bad(format!("boundaries must end at the cycle length {}", self.cycle));
        }
        if self.eval_counts.is_empty() || self.eval_counts.iter().any(|&n| n == 0 || n > self.cycle) {
            return bad(format!("eval counts {:?} must lie in 1..={}", self.eval_counts, self.cycle));
        }
        if self.starts == 0 || self.finetune_starts == 0 || self.eval_starts == 0 {
            return bad("start counts must be at least 1".into());
        }
        let needed = self.frames_needed();
        if self.frames < needed {
            return bad(format!("{} frames per sequence, the start offsets need {needed}", self.frames));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if !(self.recon_threshold > 0.0) {
            return bad("recon_threshold must be positive".into());
        }
        self.adam.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.lr.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.finetune_lr.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.stage.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Frames a sequence must hold for every (count, start) the run uses.
    pub fn frames_needed(&self) -> usize {
        let stage_max = self.boundaries[..self.boundaries.len().saturating_sub(1)]
            .iter()
            .max()
            .map_or(0, |&n| n + self.starts - 1);
        let ic_max = self.eval_counts.iter().max().copied().unwrap_or(0);
        let ft = ic_max + self.finetune_starts.max(self.eval_starts) - 1;
        stage_max.max(ft).max(self.cycle)
    }

    /// Canonical text: every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("cycle", self.cycle.to_string());
        kv("subjects", self.subjects.to_string());
        kv("frames", self.frames.to_string());
        kv("jitter", self.jitter.to_string());
        kv("split", format!("{},{},{}", self.split[0], self.split[1], self.split[2]));
        kv("boundaries", list(&self.boundaries));
        kv("eval_counts", list(&self.eval_counts));
        kv("starts", self.starts.to_string());
        kv("finetune_starts", self.finetune_starts.to_string());
        kv("eval_starts", self.eval_starts.to_string());
        kv("epochs", self.epochs.to_string());
        kv("finetune_epochs", self.finetune_epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("adam_beta1", self.adam.beta1.to_string());
        kv("adam_beta2", self.adam.beta2.to_string());
        kv("adam_epsilon", self.adam.epsilon.to_string());
        kv("weight_decay", self.adam.weight_decay.to_string());
        kv("lr_initial", self.lr.initial.to_string());
        kv("lr_factor", self.lr.factor.to_string());
        kv("lr_interval", self.lr.interval.to_string());
        kv("finetune_lr_initial", self.finetune_lr.initial.to_string());
        kv("finetune_lr_factor", self.finetune_lr.factor.to_string());
        kv("finetune_lr_interval", self.finetune_lr.interval.to_string());
        kv("encoder_channels", list(&self.stage.encoder_channels));
        kv("decoder_channels", list(&self.stage.decoder_channels));
        kv("kernel_size", self.stage.kernel_size.to_string());
        kv("dropout", self.stage.dropout.to_string());
        kv("recon_threshold", self.recon_threshold.to_string());
        kv("threads", self.threads.to_string());
        if let Some(p) = &self.data_dir {
            kv("data_dir", p.display().to_string());
        }
        if let Some(p) = &self.out_dir {
            kv("out_dir", p.display().to_string());
        }
        s
    }

    /// FNV-1a of the canonical text, excluding the thread count and paths,
    /// which do not change results.
    pub fn hash(&self) -> u64 {
        let normalised = TrainConfig {
            threads: 1,
            data_dir: None,
            out_dir: None,
            ..self.clone()
        };
        fnv1a64(normalised.to_text().as_bytes())
    }

    /// Parses `key = value` lines over the desk defaults. A leading
    /// `preset = paper|desk` line selects the base. `#` starts a comment;
    /// unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::desk();
        let mut seen_other = false;
        let mut cycle_set = false;
        let mut boundaries_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| Error::Config(format!("line {}: {m}", i + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| at(format!("`{key}` expects a number, got `{v}`")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| at(format!("`{key}` expects an integer, got `{v}`")));
            let ints = |v: &str| v.split(',').map(|x| int(x.trim())).collect::<Result<Vec<_>>>();
            let triple = |v: &str| -> Result<[usize; 3]> {
                ints(v)?
                    .try_into()
                    .map_err(|_| at(format!("`{key}` expects three integers")))
            };
            match key {
                "preset" => {
                    if seen_other {
                        return Err(at("`preset` must come before other keys".into()));
                    }
                    cfg = match value {
                        "desk" => TrainConfig::desk(),
                        "paper" => TrainConfig::paper(),
                        other => return Err(at(format!("unknown preset `{other}`"))),
                    };
                }
                "seed" => cfg.seed = value.parse().map_err(|_| at(format!("bad seed `{value}`")))?,
                "cycle" => {
                    cfg.cycle = int(value)?;
                    cycle_set = true;
                }
                "subjects" => cfg.subjects = int(value)?,
                "frames" => cfg.frames = int(value)?,
                "jitter" => cfg.jitter = num(value)?,
                "split" => {
                    let v: Vec<f64> = value.split(',').map(|x| num(x.trim())).collect::<Result<_>>()?;
                    cfg.split = v.try_into().map_err(|_| at("`split` expects three fractions".into()))?;
                }
                "boundaries" => {
                    cfg.boundaries = ints(value)?;
                    boundaries_set = true;
                }
                "eval_counts" => cfg.eval_counts = ints(value)?,
                "starts" => cfg.starts = int(value)?,
                "finetune_starts" => cfg.finetune_starts = int(value)?,
                "eval_starts" => cfg.eval_starts = int(value)?,
                "epochs" => cfg.epochs = int(value)?,
                "finetune_epochs" => cfg.finetune_epochs = int(value)?,
                "batch_size" => cfg.batch_size = int(value)?,
                "adam_beta1" => cfg.adam.beta1 = num(value)?,
                "adam_beta2" => cfg.adam.beta2 = num(value)?,
                "adam_epsilon" => cfg.adam.epsilon = num(value)?,
                "weight_decay" => cfg.adam.weight_decay = num(value)?,
                "lr_initial" => cfg.lr.initial = num(value)?,
                "lr_factor" => cfg.lr.factor = num(value)?,
                "lr_interval" => cfg.lr.interval = int(value)?,
                "finetune_lr_initial" => cfg.finetune_lr.initial = num(value)?,
                "finetune_lr_factor" => cfg.finetune_lr.factor = num(value)?,
                "finetune_lr_interval" => cfg.finetune_lr.interval = int(value)?,
                "encoder_channels" => cfg.stage.encoder_channels = triple(value)?,
                "decoder_channels" => cfg.stage.decoder_channels = triple(value)?,
                "kernel_size" => cfg.stage.kernel_size = int(value)?,
                "dropout" => cfg.stage.dropout = num(value)?,
                "recon_threshold" => cfg.recon_threshold = num(value)?,
                "threads" => cfg.threads = int(value)?,
                "data_dir" => cfg.data_dir = Some(PathBuf::from(value)),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                other => return Err(at(format!("unknown key `{other}`"))),
            }
            if key != "preset" {
                seen_other = true;
            }
        }
        if cycle_set && !boundaries_set {
            cfg.boundaries = default_boundaries(cfg.cycle);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
