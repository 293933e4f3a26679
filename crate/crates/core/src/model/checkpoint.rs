//! Binary checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ITCN"             magic
//! u32                format version
//! u32                stage count
//! record*            until the trailer
//! u64                FNV-1a 64 checksum of every preceding byte
//!
//! record := u32 name length, UTF-8 name, u32 rank, u32 dims[rank],
//!           f32 payload[product(dims)]
//! ```
//!
//! Stage tensors are named `stage{i}/{layer}` (e.g. `stage3/enc1.conv.weight`).
//! Scalar metadata is stored as rank-0 records: `stage{i}/meta.input_size`,
//! `stage{i}/meta.dropout`, and for full nets `net/meta.cycle_length`.

use std::collections::BTreeMap;
use std::path::Path;

use super::itcnet::{stack_itcnet, ItcNet};
use super::spec::StageSpec;
use super::stage::{ConvBlock, StageWeights};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ITCN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Stage(StageWeights),
    Net(ItcNet),
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn put_record(buf: &mut Vec<u8>, name: &str, t: &Tensor) -> Result<()> {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        let f = v as f32;
        if f as f64 != v {
            return Err(Error::param(format!(
                "tensor `{name}` holds {v}, which is not representable as f32"
            )));
        }
        buf.extend_from_slice(&f.to_le_bytes());
    }
    Ok(())
}

fn scalar(v: f64) -> Tensor {
    Tensor::new(&[], vec![v]).expect("rank-0")
}

fn put_stage(buf: &mut Vec<u8>, s: &StageWeights) -> Result<()> {
    let p = format!("stage{}", s.index);
    put_record(buf, &format!("{p}/meta.input_size"), &scalar(s.spec.input_size as f64))?;
    put_record(buf, &format!("{p}/meta.dropout"), &scalar(s.spec.dropout))?;
    put_record(buf, &format!("{p}/meta.time_extent"), &scalar(s.spec.time_extent as f64))?;
    for (name, t) in s.named_tensors() {
        put_record(buf, &format!("{p}/{name}"), t)?;
    }
    Ok(())
}

fn encode(stages: &[&StageWeights], cycle_length: Option<usize>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(stages.len() as u32).to_le_bytes());
    if let Some(t) = cycle_length {
        put_record(&mut buf, "net/meta.cycle_length", &scalar(t as f64))?;
    }
    for s in stages {
        put_stage(&mut buf, s)?;
    }
    let sum = fnv1a64(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    Ok(buf)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_stage(stage: &StageWeights, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode(&[stage], None)?)
}

pub fn save_net(net: &ItcNet, path: impl AsRef<Path>) -> Result<()> {
    let stages: Vec<&StageWeights> = net.stages().iter().collect();
    write(path.as_ref(), &encode(&stages, Some(net.cycle_length()))?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

struct Record {
    offset: u64,
    tensor: Tensor,
}

/// Decode a checkpoint image held in memory.
pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad magic bytes (expected \"ITCN\")"));
    }
    if bytes.len() < 4 + 4 + 4 + 8 {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8 bytes"));
    let computed = fnv1a64(&bytes[..body_end]);

    let mut r = Reader {
        bytes: &bytes[..body_end],
        pos: 4,
    };
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(4, format!("unsupported format version {version}")));
    }
    let stage_count = r.u32("stage count")? as usize;
    if stored != computed {
        return Err(Error::format(
            body_end as u64,
            format!("checksum mismatch: stored {stored:016x}, computed {computed:016x}"),
        ));
    }

    let mut records: BTreeMap<String, Record> = BTreeMap::new();
    while r.pos < body_end {
        let offset = r.pos as u64;
        let name_len = r.u32("record name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "record name")?)
            .map_err(|_| Error::format(offset + 4, "record name is not UTF-8"))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > 4 {
            return Err(Error::format(r.pos as u64 - 4, format!("rank {rank} exceeds 4")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|n| n.checked_mul(4).is_some())
            .ok_or_else(|| Error::format(r.pos as u64, "tensor size overflows"))?;
        let payload = r.take(n * 4, &format!("payload of `{name}`"))?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let tensor = Tensor::new(&dims, data).map_err(|e| Error::format(offset, e.to_string()))?;
        if records.insert(name.clone(), Record { offset, tensor }).is_some() {
            return Err(Error::format(offset, format!("duplicate record `{name}`")));
        }
    }

    let mut stage_ids: Vec<u32> = records
        .keys()
        .filter_map(|k| k.strip_prefix("stage")?.split('/').next()?.parse().ok())
        .collect();
    stage_ids.dedup();
    if stage_ids.len() != stage_count {
        return Err(Error::format(
            8,
            format!(
                "header declares {stage_count} stages but records describe {}",
                stage_ids.len()
            ),
        ));
    }
    let mut stages = Vec::with_capacity(stage_count);
    for id in stage_ids {
        stages.push(stage_from_records(id, &mut records, body_end as u64)?);
    }
    let cycle = records.remove("net/meta.cycle_length");
    if let Some((name, rec)) = records.into_iter().next() {
        return Err(Error::format(rec.offset, format!("unexpected record `{name}`")));
    }
    match cycle {
        Some(rec) => {
            let t = rec.tensor.data()[0];
            stack_itcnet(stages, t as usize).map_err(|e| Error::format(rec.offset, e.to_string()))
        }
        .map(Checkpoint::Net),
        None if stages.len() == 1 => Ok(Checkpoint::Stage(stages.pop().expect("one stage"))),
        None => Err(Error::format(
            8,
            "multi-stage checkpoint without net/meta.cycle_length",
        )),
    }
}

fn stage_from_records(
    id: u32,
    records: &mut BTreeMap<String, Record>,
    end: u64,
) -> Result<StageWeights> {
    let prefix = format!("stage{id}");
    let mut take = |name: &str| -> Result<Record> {
        records
            .remove(&format!("{prefix}/{name}"))
            .ok_or_else(|| Error::format(end, format!("missing record `{prefix}/{name}`")))
    };
    let meta = |r: Record| -> Result<f64> {
        if r.tensor.len() != 1 {
            return Err(Error::format(r.offset, "metadata record must hold one value"));
        }
        Ok(r.tensor.data()[0])
    };
    let input_size = meta(take("meta.input_size")?)? as usize;
    let dropout = meta(take("meta.dropout")?)?;
    let time_extent = meta(take("meta.time_extent")?)? as usize;

    let mut block = |name: &str| -> Result<(ConvBlock, u64)> {
        let w = take(&format!("{name}.conv.weight"))?;
        let offset = w.offset;
        Ok((
            ConvBlock {
                weight: w.tensor,
                bias: take(&format!("{name}.conv.bias"))?.tensor,
                gamma: take(&format!("{name}.bn.gamma"))?.tensor,
                beta: take(&format!("{name}.bn.beta"))?.tensor,
                running_mean: take(&format!("{name}.bn.running_mean"))?.tensor,
                running_var: take(&format!("{name}.bn.running_var"))?.tensor,
            },
            offset,
        ))
    };
    let mut encoder = Vec::new();
    let mut decoder = Vec::new();
    let mut first_offset = end;
    for i in 1..=3 {
        let (b, off) = block(&format!("enc{i}"))?;
        first_offset = first_offset.min(off);
        encoder.push(b);
    }
    for i in 1..=3 {
        decoder.push(block(&format!("dec{i}"))?.0);
    }
    let out_weight = take("out.conv.weight")?.tensor;
    let out_bias = take("out.conv.bias")?.tensor;

    let channels = |blocks: &[ConvBlock]| -> [usize; 3] {
        [0, 1, 2].map(|i| blocks[i].weight.shape().first().copied().unwrap_or(0))
    };
    let spec = StageSpec {
        input_size,
        encoder_channels: channels(&encoder),
        decoder_channels: channels(&decoder),
        kernel_size: out_weight.shape().get(2).copied().unwrap_or(0),
        time_extent,
        dropout,
    };
    let stage = StageWeights {
        index: id,
        spec,
        encoder,
        decoder,
        out_weight,
        out_bias,
    };
    stage
        .validate()
        .map_err(|e| Error::format(first_offset, e.to_string()))?;
    Ok(stage)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn load_stage(path: impl AsRef<Path>) -> Result<StageWeights> {
    match load_checkpoint(path)? {
        Checkpoint::Stage(s) => Ok(s),
        Checkpoint::Net(_) => Err(Error::format(8, "expected a single-stage checkpoint")),
    }
}

pub fn load_net(path: impl AsRef<Path>) -> Result<ItcNet> {
    match load_checkpoint(path)? {
        Checkpoint::Net(n) => Ok(n),
        Checkpoint::Stage(_) => Err(Error::format(8, "expected a nine-stage checkpoint")),
    }
}
