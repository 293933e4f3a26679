//! Gait energy images: per-pixel means of registered silhouettes.

use super::image::BinaryImage;
use super::register::{register_frame, GEI_SIZE};
use super::sequence::{Role, SilhouetteSequence};
use crate::error::{Error, Result};

/// A sequence whose frames have been registered to the 64x64 grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegisteredSequence {
    pub subject: String,
    pub sequence: String,
    pub role: Role,
    pub cycle: usize,
    frames: Vec<BinaryImage>,
}

impl RegisteredSequence {
    pub fn register(seq: &SilhouetteSequence) -> Result<Self> {
        let frames = seq
            .frames()
            .iter()
            .enumerate()
            .map(|(k, f)| {
                register_frame(f).map_err(|e| Error::Ingest {
                    frame: k + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegisteredSequence {
            subject: seq.subject.clone(),
            sequence: seq.sequence.clone(),
            role: seq.role,
            cycle: seq.cycle,
            frames,
        })
    }

    pub fn frames(&self) -> &[BinaryImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A 64x64 energy image together with where in its sequence it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gei {
    pub subject: String,
    pub sequence: String,
    /// 1-based first frame.
    pub start: usize,
    /// Number of frames averaged.
    pub count: usize,
    pub complete: bool,
    pixels: Vec<f64>,
}

impl Gei {
    /// Same provenance, new pixels (used for reconstructed images).
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Gei> {
        if pixels.len() != GEI_SIZE * GEI_SIZE {
            return Err(Error::shape(format!("a GEI has {} pixels, got {}", GEI_SIZE * GEI_SIZE, pixels.len())));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param(format!("GEI pixel {i} = {} outside [0, 1]", pixels[i])));
        }
        Ok(Gei {
            pixels,
            ..self.clone()
        })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn size(&self) -> usize {
        GEI_SIZE
    }
}

/// Mean of registered frames `start..start + count` (1-based).
pub fn compute_gei(seq: &RegisteredSequence, start: usize, count: usize) -> Result<Gei> {
    if start == 0 || count == 0 || start + count - 1 > seq.len() {
        return Err(Error::param(format!(
            "frames {start}..{} out of range for a {}-frame sequence",
            start as isize + count as isize - 1,
            seq.len()
        )));
    }
    // integer sums keep the result independent of frame order
    let mut sums = vec![0u32; GEI_SIZE * GEI_SIZE];
    for frame in &seq.frames[start - 1..start - 1 + count] {
        for (s, &p) in sums.iter_mut().zip(frame.pixels()) {
            *s += p as u32;
        }
    }
    Ok(Gei {
        subject: seq.subject.clone(),
        sequence: seq.sequence.clone(),
        start,
        count,
        complete: count == seq.cycle,
        pixels: sums.iter().map(|&s| s as f64 / count as f64).collect(),
    })
}

/// The complete GEI over the first gait cycle.
pub fn tc_gei(seq: &RegisteredSequence) -> Result<Gei> {
    compute_gei(seq, 1, seq.cycle)
}

/// One IC-GEI per (frame count, start) pair, counts outermost, starts
/// `1..=starts` innermost.
pub fn enumerate_icgeis(seq: &RegisteredSequence, counts: &[usize], starts: usize) -> Result<Vec<Gei>> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if starts == 0 || max + starts - 1 > seq.len() {
        return Err(Error::param(format!(
            "{starts} starts with up to {max} frames need {} frames, sequence has {}",
            max + starts.max(1) - 1,
            seq.len()
        )));
    }
    let mut out = Vec::with_capacity(counts.len() * starts);
    for &n in counts {
        for m in 1..=starts {
            out.push(compute_gei(seq, m, n)?);
        }
    }
    Ok(out)
}
