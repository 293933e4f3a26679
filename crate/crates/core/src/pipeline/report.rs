//! Report files: comma-separated tables tagged with the configuration hash
//! and seed, per-sample dumps, curve files and a plain-text summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! number parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::eval::{Condition, RecogReport, ReconReport, ReconSample};
use super::train::LossHistory;
use crate::error::{Error, Result};
use crate::metrics::{cmc_csv, mean_std, parse_cmc_csv, parse_roc_csv, roc_csv, RocPoint};

pub const RECON_FILE: &str = "recon.csv";
pub const RECON_SAMPLES_FILE: &str = "recon_samples.csv";
pub const RECOG_FILE: &str = "recog.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RECON_SUMMARY_FILE: &str = "recon_summary.txt";
pub const RECOG_SUMMARY_FILE: &str = "recog_summary.txt";
pub const CURVE_DIR: &str = "curves";

pub const RECON_HEADER: &str = "config_hash,seed,n,samples,mse_mean,mse_std,ssim_mean,ssim_std,recon_acc_mean,recon_acc_std,input_mse_mean,input_mse_std";
pub const RECON_SAMPLES_HEADER: &str = "config_hash,seed,n,subject,sequence,start,mse,ssim,recon_acc,input_mse";
pub const RECOG_HEADER: &str = "config_hash,seed,n,condition,probes,gallery,rank1,rank5,eer";

fn tag(config: &TrainConfig) -> String {
    format!("{:016x},{}", config.hash(), config.seed)
}

pub fn recon_csv(report: &ReconReport, config: &TrainConfig) -> String {
    let t = tag(config);
    let mut s = format!("{RECON_HEADER}\n");
    for r in &report.rows {
        writeln!(
            s,
            "{t},{},{},{},{},{},{},{},{},{},{}",
            r.count, r.samples, r.mse.0, r.mse.1, r.ssim.0, r.ssim.1, r.recon_acc.0, r.recon_acc.1, r.input_mse.0, r.input_mse.1
        )
        .unwrap();
    }
    s
}

pub fn recon_samples_csv(report: &ReconReport, config: &TrainConfig) -> String {
    let t = tag(config);
    let mut s = format!("{RECON_SAMPLES_HEADER}\n");
    for r in &report.samples {
        writeln!(
            s,
            "{t},{},{},{},{},{},{},{},{}",
            r.count, r.subject, r.sequence, r.start, r.mse, r.ssim, r.recon_acc, r.input_mse
        )
        .unwrap();
    }
    s
}

pub fn recog_csv(report: &RecogReport, config: &TrainConfig) -> String {
    let t = tag(config);
    let mut s = format!("{RECOG_HEADER}\n");
    for r in &report.rows {
        writeln!(
            s,
            "{t},{},{},{},{},{},{},{}",
            r.count, r.condition, r.probes, r.gallery, r.rank1, r.rank5, r.eer
        )
        .unwrap();
    }
    s
}

/// Non-empty lines after the header, with their byte offsets.
fn body_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let mut offset = 0u64;
    text.split_inclusive('\n')
        .map(move |l| {
            let at = offset;
            offset += l.len() as u64;
            (at, l.trim_end_matches(['\r', '\n']))
        })
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
}

fn fields<'a>(line: &'a str, n: usize, what: &str, at: u64) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != n {
        return Err(Error::format(at, format!("{what}: expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

fn number<T: std::str::FromStr>(v: &str, what: &str, at: u64) -> Result<T> {
    v.parse().map_err(|_| Error::format(at, format!("{what}: bad number `{v}`")))
}

/// Reads back a per-sample dump.
pub fn parse_recon_samples(text: &str) -> Result<Vec<ReconSample>> {
    let mut out = Vec::new();
    for (at, line) in body_lines(text) {
        let f = fields(line, 10, RECON_SAMPLES_FILE, at)?;
        let num = |k: usize| number::<f64>(f[k], RECON_SAMPLES_FILE, at);
        out.push(ReconSample {
            count: number(f[2], RECON_SAMPLES_FILE, at)?,
            subject: f[3].to_string(),
            sequence: f[4].to_string(),
            start: number(f[5], RECON_SAMPLES_FILE, at)?,
            mse: num(6)?,
            ssim: num(7)?,
            recon_acc: num(8)?,
            input_mse: num(9)?,
        });
    }
    Ok(out)
}

/// `(n, condition, rank1, rank5, eer)` rows of a recognition table.
pub fn parse_recog_rows(text: &str) -> Result<Vec<(usize, Condition, f64, f64, f64)>> {
    let mut out = Vec::new();
    for (at, line) in body_lines(text) {
        let f = fields(line, 9, RECOG_FILE, at)?;
        out.push((
            number(f[2], RECOG_FILE, at)?,
            f[3].parse()?,
            number(f[6], RECOG_FILE, at)?,
            number(f[7], RECOG_FILE, at)?,
            number(f[8], RECOG_FILE, at)?,
        ));
    }
    Ok(out)
}

/// Recomputes `(mean, std)` of each metric per frame count from the
/// per-sample dump, in the order the counts first appear.
pub fn recompute_recon_rows(samples: &[ReconSample]) -> Vec<(usize, [(f64, f64); 4])> {
    let mut counts: Vec<usize> = Vec::new();
    for s in samples {
        if !counts.contains(&s.count) {
            counts.push(s.count);
        }
    }
    counts
        .into_iter()
        .map(|n| {
            let rows: Vec<&ReconSample> = samples.iter().filter(|s| s.count == n).collect();
            let stat = |f: fn(&ReconSample) -> f64| mean_std(&rows.iter().map(|s| f(s)).collect::<Vec<_>>());
            (n, [stat(|s| s.mse), stat(|s| s.ssim), stat(|s| s.recon_acc), stat(|s| s.input_mse)])
        })
        .collect()
}

/// File name of one curve: `cmc_rc_n04.csv`.
pub fn curve_file_name(kind: &str, condition: Condition, count: usize) -> String {
    format!("{kind}_{condition}_n{count:02}.csv")
}

/// Parses a curve file name back into `(kind, condition, count)`.
pub fn parse_curve_file_name(name: &str) -> Option<(String, Condition, usize)> {
    let stem = name.strip_suffix(".csv")?;
    let mut parts = stem.split('_');
    let kind = parts.next()?;
    let condition = parts.next()?.parse().ok()?;
    let count = parts.next()?.strip_prefix('n')?.parse().ok()?;
    if parts.next().is_some() || !(kind == "cmc" || kind == "roc") {
        return None;
    }
    Some((kind.to_string(), condition, count))
}

/// Refuses to overwrite any of `paths` unless `force` is set.
pub fn check_writable(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::Config(format!("{} exists (pass --force to overwrite)", p.display()))),
        None => Ok(()),
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn recon_outputs(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join(RECON_FILE), dir.join(RECON_SAMPLES_FILE), dir.join(RECON_SUMMARY_FILE)]
}

/// Files a recognition report over `counts` writes.
pub fn recog_outputs(dir: &Path, counts: &[usize]) -> Vec<PathBuf> {
    let mut v = vec![dir.join(RECOG_FILE), dir.join(RECOG_SUMMARY_FILE)];
    for &n in counts {
        for c in Condition::ALL {
            for kind in ["cmc", "roc"] {
                v.push(dir.join(CURVE_DIR).join(curve_file_name(kind, c, n)));
            }
        }
    }
    v
}

pub fn write_recon_report(dir: &Path, report: &ReconReport, config: &TrainConfig) -> Result<()> {
    write_file(&dir.join(RECON_FILE), recon_csv(report, config))?;
    write_file(&dir.join(RECON_SAMPLES_FILE), recon_samples_csv(report, config))?;
    write_file(&dir.join(RECON_SUMMARY_FILE), summary_text(config, Some(report), None))
}

pub fn write_recog_report(dir: &Path, report: &RecogReport, config: &TrainConfig) -> Result<()> {
    write_file(&dir.join(RECOG_FILE), recog_csv(report, config))?;
    write_file(&dir.join(RECOG_SUMMARY_FILE), summary_text(config, None, Some(report)))?;
    for c in &report.curves {
        let curves = dir.join(CURVE_DIR);
        write_file(&curves.join(curve_file_name("cmc", c.condition, c.count)), cmc_csv(&c.cmc))?;
        write_file(&curves.join(curve_file_name("roc", c.condition, c.count)), roc_csv(&c.roc))?;
    }
    Ok(())
}

/// One (condition, N) pair of curves read back from a report directory.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredCurves {
    pub condition: Condition,
    pub count: usize,
    pub cmc: Vec<f64>,
    pub roc: Vec<RocPoint>,
}

/// Reads every `cmc_*`/`roc_*` pair under `dir/curves`, ordered by N then
/// condition. A directory without curves is a configuration error, as is a
/// CMC file whose ROC partner is missing.
pub fn read_curves(dir: &Path) -> Result<Vec<StoredCurves>> {
    let curves = dir.join(CURVE_DIR);
    let listing = fs::read_dir(&curves)
        .map_err(|e| Error::Config(format!("no curves under {}: {e}", curves.display())))?;
    let mut keys = Vec::new();
    for item in listing {
        let item = item.map_err(|e| Error::io(&curves, e))?;
        if let Some((kind, condition, count)) = parse_curve_file_name(&item.file_name().to_string_lossy()) {
            if kind == "cmc" {
                keys.push((count, condition));
            }
        }
    }
    if keys.is_empty() {
        return Err(Error::Config(format!("no curve files in {}", curves.display())));
    }
    keys.sort_by_key(|&(n, c)| (n, Condition::ALL.iter().position(|&x| x == c)));
    keys.iter()
        .map(|&(count, condition)| {
            let read = |kind| {
                let path = curves.join(curve_file_name(kind, condition, count));
                fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
            };
            Ok(StoredCurves {
                condition,
                count,
                cmc: parse_cmc_csv(&read("cmc")?)?,
                roc: parse_roc_csv(&read("roc")?)?,
            })
        })
        .collect()
}

/// Human-readable digest of whichever reports are present.
pub fn summary_text(config: &TrainConfig, recon: Option<&ReconReport>, recog: Option<&RecogReport>) -> String {
    let mut s = String::new();
    writeln!(s, "config_hash {:016x}  seed {}", config.hash(), config.seed).unwrap();
    if let Some(r) = recon {
        writeln!(s, "\nreconstruction (mean ± std over {} test samples per N)", r.rows.first().map_or(0, |r| r.samples)).unwrap();
        writeln!(s, "{:>4}  {:>19}  {:>15}  {:>15}  {:>10}", "N", "MSE(RC,TC)", "SSIM", "Recon-Acc", "MSE(IC,TC)").unwrap();
        for row in &r.rows {
            writeln!(
                s,
                "{:>4}  {:.2e} ± {:.2e}  {:.3} ± {:.3}  {:.3} ± {:.3}  {:.2e}",
                row.count, row.mse.0, row.mse.1, row.ssim.0, row.ssim.1, row.recon_acc.0, row.recon_acc.1, row.input_mse.0
            )
            .unwrap();
        }
    }
    if let Some(r) = recog {
        writeln!(s, "\nrecognition against the complete-GEI gallery").unwrap();
        writeln!(s, "{:>4}  {:>20}  {:>20}  {:>20}", "N", "rank-1 IC/RC/TC", "rank-5 IC/RC/TC", "EER IC/RC/TC").unwrap();
        let mut counts: Vec<usize> = r.rows.iter().map(|x| x.count).collect();
        counts.dedup();
        for n in counts {
            let get = |c| r.row(n, c);
            let triple = |f: fn(&super::eval::RecogRow) -> f64| {
                Condition::ALL
                    .iter()
                    .map(|&c| get(c).map_or("-".to_string(), |x| format!("{:.3}", f(x))))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            writeln!(s, "{n:>4}  {:>20}  {:>20}  {:>20}", triple(|x| x.rank1), triple(|x| x.rank5), triple(|x| x.eer)).unwrap();
        }
    }
    s
}

pub fn loss_outputs(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}_loss.csv"))
}

pub fn write_loss(dir: &Path, name: &str, history: &LossHistory) -> Result<()> {
    write_file(&loss_outputs(dir, name), history.to_csv())
}
