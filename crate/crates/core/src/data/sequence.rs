//! Silhouette sequences, the manifest that lists them, and frame loading.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::image::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Gallery,
    Probe,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Gallery => "gallery",
            Role::Probe => "probe",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gallery" => Ok(Role::Gallery),
            "probe" => Ok(Role::Probe),
            other => Err(Error::Config(format!("unknown role `{other}`"))),
        }
    }
}

/// Ordered binary frames of one walk, with its gait-cycle length.
#[derive(Clone, Debug, PartialEq)]
pub struct SilhouetteSequence {
    pub subject: String,
    pub sequence: String,
    pub role: Role,
    pub cycle: usize,
    /// Informational only.
    pub frame_rate: Option<f64>,
    frames: Vec<BinaryImage>,
}

impl SilhouetteSequence {
    pub fn new(
        subject: impl Into<String>,
        sequence: impl Into<String>,
        role: Role,
        cycle: usize,
        frames: Vec<BinaryImage>,
    ) -> Result<Self> {
        if cycle == 0 {
            return Err(Error::param("cycle length must be at least 1"));
        }
        if frames.len() < cycle {
            return Err(Error::param(format!(
                "sequence has {} frames, fewer than its cycle length {cycle}",
                frames.len()
            )));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        if let Some(k) = frames.iter().position(|f| (f.width(), f.height()) != (w, h)) {
            return Err(Error::Ingest {
                frame: k + 1,
                message: format!(
                    "resolution {}x{} differs from {w}x{h}",
                    frames[k].width(),
                    frames[k].height()
                ),
            });
        }
        Ok(SilhouetteSequence {
            subject: subject.into(),
            sequence: sequence.into(),
            role,
            cycle,
            frame_rate: None,
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

/// One manifest line: `subject,sequence,role,cycle,frame_glob`.
///
/// The glob is relative to the manifest's directory and has a single `*`
/// in its file name standing for the 1-based frame number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject: String,
    pub sequence: String,
    pub role: Role,
    pub cycle: usize,
    pub frame_glob: String,
}

pub const MANIFEST_HEADER: &str = "subject,sequence,role,cycle,frame_glob";

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == MANIFEST_HEADER {
            continue;
        }
        let bad = |msg: String| Error::Config(format!("manifest line {}: {msg}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad("empty subject or sequence id".into()));
        }
        let role = fields[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        let cycle = fields[3]
            .parse::<usize>()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| bad(format!("invalid cycle length `{}`", fields[3])))?;
        if fields[4].matches('*').count() != 1 || Path::new(fields[4]).parent().is_some_and(|p| p.to_string_lossy().contains('*')) {
            return Err(bad(format!("frame glob `{}` needs exactly one `*` in the file name", fields[4])));
        }
        entries.push(ManifestEntry {
            subject: fields[0].to_string(),
            sequence: fields[1].to_string(),
            role,
            cycle,
            frame_glob: fields[4].to_string(),
        });
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.subject, e.sequence, e.role, e.cycle, e.frame_glob
        ));
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

/// Frame files matched by the glob, ordered by frame number. Numbers must
/// run 1..=n without gaps.
pub fn resolve_frames(entry: &ManifestEntry, base: &Path) -> Result<Vec<PathBuf>> {
    let glob = base.join(&entry.frame_glob);
    let dir = glob.parent().unwrap_or(base).to_path_buf();
    let pattern = glob
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (prefix, suffix) = pattern.split_once('*').expect("validated by the manifest parser");

    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    let listing = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    for item in listing {
        let item = item.map_err(|e| Error::io(&dir, e))?;
        let name = item.file_name().to_string_lossy().into_owned();
        let Some(middle) = name
            .strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(suffix))
        else {
            continue;
        };
        if !middle.is_empty() && middle.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(k) = middle.parse::<usize>() {
                found.push((k, item.path()));
            }
        }
    }
    found.sort();
    for (i, (k, path)) in found.iter().enumerate() {
        if *k != i + 1 {
            return Err(Error::Ingest {
                frame: i + 1,
                message: format!("missing frame (next file found is {})", path.display()),
            });
        }
    }
    if found.is_empty() {
        return Err(Error::Ingest {
            frame: 1,
            message: format!("no files match {}", glob.display()),
        });
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

pub fn load_silhouette_sequence(entry: &ManifestEntry, base: &Path) -> Result<SilhouetteSequence> {
    let paths = resolve_frames(entry, base)?;
    let mut frames = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let ingest = |message: String| Error::Ingest { frame: i + 1, message };
        let gray = GrayImage::read(path).map_err(|e| ingest(e.to_string()))?;
        let frame = gray
            .to_binary()
            .map_err(|m| ingest(format!("{}: {m}", path.display())))?;
        frames.push(frame);
    }
    if frames.len() < entry.cycle {
        return Err(Error::Ingest {
            frame: frames.len() + 1,
            message: format!("missing frame: cycle length {} needs more frames", entry.cycle),
        });
    }
    SilhouetteSequence::new(&entry.subject, &entry.sequence, entry.role, entry.cycle, frames)
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes each sequence as numbered PGM frames under `dir/<subject>_<sequence>/`
/// and a manifest listing them. Returns the manifest path.
pub fn save_sequences(dir: &Path, sequences: &[SilhouetteSequence]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(sequences.len());
    for s in sequences {
        let sub = format!("{}_{}", s.subject, s.sequence);
        let frames_dir = dir.join(&sub);
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        for (i, f) in s.frames().iter().enumerate() {
            GrayImage::from_binary(f).write(&frames_dir.join(format!("{:04}.pgm", i + 1)))?;
        }
        entries.push(ManifestEntry {
            subject: s.subject.clone(),
            sequence: s.sequence.clone(),
            role: s.role,
            cycle: s.cycle,
            frame_glob: format!("{sub}/*.pgm"),
        });
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, write_manifest(&entries)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads every sequence listed in a manifest. `path` may be the manifest
/// itself or the directory holding `manifest.csv`.
pub fn load_sequences(path: &Path) -> Result<Vec<SilhouetteSequence>> {
    let manifest = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = read_manifest(&manifest)?;
    if entries.is_empty() {
        return Err(Error::Config(format!("{} lists no sequences", manifest.display())));
    }
    entries
        .iter()
        .map(|e| {
            load_silhouette_sequence(e, base).map_err(|err| match err {
                Error::Ingest { frame, message } => Error::Ingest {
                    frame,
                    message: format!("{}/{}: {message}", e.subject, e.sequence),
                },
                other => other,
            })
        })
        .collect()
}
