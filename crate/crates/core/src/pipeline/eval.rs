//! Reconstruction and recognition evaluation over IC-GEI types.

use std::fmt;
use std::str::FromStr;

use super::config::TrainConfig;
use super::dataset::stack;
use crate::data::{compute_gei, tc_gei, Gei, RegisteredSequence, Role, GEI_SIZE};
use crate::error::{Error, Result};
use crate::metrics::{cmc, eer, mean_std, mse_image, rank_k, recon_acc_image, roc, ssim, CmcCurve, RocCurve, ScoreMatrix};
use crate::model::Reconstructor;
use crate::parallel::map_indexed;

const EVAL_BATCH: usize = 32;

/// Runs `net` over `inputs` in batches and rewraps the outputs with the
/// inputs' provenance.
pub fn reconstruct_all(net: &dyn Reconstructor, inputs: &[Gei]) -> Result<Vec<Gei>> {
    let plane = GEI_SIZE * GEI_SIZE;
    let mut out = Vec::with_capacity(inputs.len());
    let idx: Vec<usize> = (0..inputs.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let y = net.reconstruct(&stack(inputs, chunk)?)?;
        if y.len() != chunk.len() * plane {
            return Err(Error::shape(format!(
                "reconstructor returned {} values for {} images",
                y.len(),
                chunk.len()
            )));
        }
        for (k, &i) in chunk.iter().enumerate() {
            out.push(inputs[i].with_pixels(y.data()[k * plane..(k + 1) * plane].to_vec())?);
        }
    }
    Ok(out)
}

/// Metrics for one reconstructed IC-GEI.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconSample {
    pub count: usize,
    pub subject: String,
    pub sequence: String,
    pub start: usize,
    pub mse: f64,
    pub ssim: f64,
    pub recon_acc: f64,
    /// MSE of the unreconstructed input against the complete GEI.
    pub input_mse: f64,
}

/// `(mean, population std)` of each metric over one IC-GEI type.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconRow {
    pub count: usize,
    pub samples: usize,
    pub mse: (f64, f64),
    pub ssim: (f64, f64),
    pub recon_acc: (f64, f64),
    pub input_mse: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconReport {
    pub rows: Vec<ReconRow>,
    pub samples: Vec<ReconSample>,
}

impl ReconReport {
    pub fn row(&self, count: usize) -> Option<&ReconRow> {
        self.rows.iter().find(|r| r.count == count)
    }
}

/// Compares reconstructions of every `eval_counts x eval_starts` IC-GEI of
/// `sequences` against the sequence's complete GEI.
pub fn evaluate_reconstruction(
    net: &dyn Reconstructor,
    sequences: &[RegisteredSequence],
    config: &TrainConfig,
) -> Result<ReconReport> {
    if sequences.is_empty() {
        return Err(Error::Protocol("no sequences to evaluate".into()));
    }
    let targets = sequences.iter().map(tc_gei).collect::<Result<Vec<_>>>()?;
    let mut report = ReconReport::default();
    for &n in &config.eval_counts {
        let mut inputs = Vec::new();
        let mut owner = Vec::new();
        for (s, seq) in sequences.iter().enumerate() {
            for m in 1..=config.eval_starts {
                inputs.push(compute_gei(seq, m, n)?);
                owner.push(s);
            }
        }
        let outputs = reconstruct_all(net, &inputs)?;
        let samples = map_indexed(inputs.len(), |i| -> Result<ReconSample> {
            let target = &targets[owner[i]];
            Ok(ReconSample {
                count: n,
                subject: inputs[i].subject.clone(),
                sequence: inputs[i].sequence.clone(),
                start: inputs[i].start,
                mse: mse_image(&outputs[i], target)?,
                ssim: ssim(&outputs[i], target)?,
                recon_acc: recon_acc_image(&outputs[i], target, config.recon_threshold)?,
                input_mse: mse_image(&inputs[i], target)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let stat = |f: fn(&ReconSample) -> f64| mean_std(&samples.iter().map(f).collect::<Vec<_>>());
        report.rows.push(ReconRow {
            count: n,
            samples: samples.len(),
            mse: stat(|s| s.mse),
            ssim: stat(|s| s.ssim),
            recon_acc: stat(|s| s.recon_acc),
            input_mse: stat(|s| s.input_mse),
        });
        report.samples.extend(samples);
    }
    Ok(report)
}

/// Which probe image is matched against the complete-GEI gallery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// The raw incomplete GEI.
    Ic,
    /// Its reconstruction.
    Rc,
    /// The probe sequence's complete GEI.
    Tc,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Ic, Condition::Rc, Condition::Tc];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ic => "ic",
            Condition::Rc => "rc",
            Condition::Tc => "tc",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(Condition::Ic),
            "rc" => Ok(Condition::Rc),
            "tc" => Ok(Condition::Tc),
            _ => Err(Error::param(format!("unknown condition '{s}' (expected ic, rc or tc)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecogRow {
    pub count: usize,
    pub condition: Condition,
    pub probes: usize,
    pub gallery: usize,
    pub rank1: f64,
    pub rank5: f64,
    pub eer: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecogCurves {
    pub count: usize,
    pub condition: Condition,
    pub cmc: CmcCurve,
    pub roc: RocCurve,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecogReport {
    pub rows: Vec<RecogRow>,
    pub curves: Vec<RecogCurves>,
}

impl RecogReport {
    pub fn row(&self, count: usize, condition: Condition) -> Option<&RecogRow> {
        self.rows.iter().find(|r| r.count == count && r.condition == condition)
    }
}

fn score(probes: &[Gei], gallery: &[Gei], count: usize, condition: Condition) -> Result<(RecogRow, RecogCurves)> {
    let scores = ScoreMatrix::from_geis(probes, gallery)?;
    let cmc = cmc(&scores)?;
    let roc = roc(&scores)?;
    let row = RecogRow {
        count,
        condition,
        probes: probes.len(),
        gallery: gallery.len(),
        rank1: rank_k(&cmc, 1),
        rank5: rank_k(&cmc, 5),
        eer: eer(&roc),
    };
    Ok((row, RecogCurves { count, condition, cmc, roc }))
}

/// Identification and verification of probe sequences against a gallery
/// of complete GEIs, for every IC-GEI type and condition.
pub fn evaluate_recognition(
    net: &dyn Reconstructor,
    gallery: &[RegisteredSequence],
    probes: &[RegisteredSequence],
    config: &TrainConfig,
) -> Result<RecogReport> {
    if gallery.is_empty() || probes.is_empty() {
        return Err(Error::Protocol("gallery and probe sets must be nonempty".into()));
    }
    for (set, role) in [(gallery, Role::Gallery), (probes, Role::Probe)] {
        if let Some(s) = set.iter().find(|s| s.role != role) {
            return Err(Error::Protocol(format!(
                "sequence {}/{} has role {} but is used as {role}",
                s.subject, s.sequence, s.role
            )));
        }
    }
    let gallery_geis = gallery.iter().map(tc_gei).collect::<Result<Vec<_>>>()?;
    let tc_probes = probes.iter().map(tc_gei).collect::<Result<Vec<_>>>()?;
    let tc = score(&tc_probes, &gallery_geis, 0, Condition::Tc)?;

    let mut report = RecogReport::default();
    for &n in &config.eval_counts {
        let mut ic = Vec::new();
        for seq in probes {
            for m in 1..=config.eval_starts {
                ic.push(compute_gei(seq, m, n)?);
            }
        }
        let rc = reconstruct_all(net, &ic)?;
        for (geis, cond) in [(&ic, Condition::Ic), (&rc, Condition::Rc)] {
            let (row, curves) = score(geis, &gallery_geis, n, cond)?;
            report.rows.push(row);
            report.curves.push(curves);
        }
        // the complete probe does not depend on N; repeat it per panel
        let (mut row, mut curves) = tc.clone();
        row.count = n;
        curves.count = n;
        report.rows.push(row);
        report.curves.push(curves);
    }
    Ok(report)
}
