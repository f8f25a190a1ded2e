//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "OPDQ"  u32 version  u64 seed  u8 phase  u64 episode  u64 global_step
//! u64 adam_step  u32 tensor_count
//! tensor_count × { u32 name_len, name, u32 rank, rank × u32 dim, f32 data }
//! ```
//!
//! Tensors appear as `online.*`, `target.*`, `adam.m.*`, `adam.v.*`, each in
//! network parameter order.

use std::path::Path;

use crate::agent::{NetParams, QNetwork};
use crate::error::{CheckpointError, Error, Result};
use crate::nn::{AdamState, Tensor};
use crate::trainer::Phase;

pub const MAGIC: [u8; 4] = *b"OPDQ";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointBlob {
    pub seed: u64,
    pub phase: Phase,
    /// Completed episodes.
    pub episode: u64,
    pub global_step: u64,
    pub online: NetParams<f32>,
    pub target: NetParams<f32>,
    pub adam: AdamState<f32>,
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(blob: &CheckpointBlob) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&blob.seed.to_le_bytes());
    out.push(blob.phase.code());
    out.extend_from_slice(&blob.episode.to_le_bytes());
    out.extend_from_slice(&blob.global_step.to_le_bytes());
    out.extend_from_slice(&blob.adam.step.to_le_bytes());
    let online = blob.online.named();
    let count = online.len() * 4;
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for (name, t) in &online {
        put_tensor(&mut out, &format!("online.{name}"), t);
    }
    for (name, t) in blob.target.named() {
        put_tensor(&mut out, &format!("target.{name}"), t);
    }
    for ((name, _), t) in online.iter().zip(&blob.adam.m) {
        put_tensor(&mut out, &format!("adam.m.{name}"), t);
    }
    for ((name, _), t) in online.iter().zip(&blob.adam.v) {
        put_tensor(&mut out, &format!("adam.v.{name}"), t);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<f32>, CheckpointError> {
        let len = self.u32()? as usize;
        let found = self.take(len)?;
        if found != name.as_bytes() {
            return Err(CheckpointError::Malformed(format!(
                "expected tensor `{name}`, found `{}`",
                String::from_utf8_lossy(found)
            )));
        }
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(CheckpointError::Malformed(format!("rank {rank} for `{name}`")));
        }
        let dims = (0..rank)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if dims != shape {
            return Err(CheckpointError::ShapeMismatch {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: dims,
            });
        }
        let n: usize = dims.iter().product();
        let data = self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Tensor::from_vec(&dims, data).expect("length matches dims"))
    }

    fn params(
        &mut self,
        net: &QNetwork,
        prefix: &str,
        shapes: &[(String, Vec<usize>)],
    ) -> Result<NetParams<f32>, CheckpointError> {
        let mut p = net.zeros::<f32>();
        for (slot, (name, shape)) in p.iter_mut().zip(shapes) {
            *slot = self.tensor(&format!("{prefix}.{name}"), shape)?;
        }
        Ok(p)
    }
}

/// Decodes a checkpoint for `net`, checking every tensor name and shape.
pub fn decode(bytes: &[u8], net: &QNetwork) -> Result<CheckpointBlob, CheckpointError> {
    let mut r = Reader { bytes };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let seed = r.u64()?;
    let code = r.u8()?;
    let phase = Phase::from_code(code).ok_or_else(|| CheckpointError::Malformed(format!("phase code {code}")))?;
    let episode = r.u64()?;
    let global_step = r.u64()?;
    let adam_step = r.u64()?;
    let shapes = net.named_shapes();
    let count = r.u32()? as usize;
    if count != shapes.len() * 4 {
        return Err(CheckpointError::Malformed(format!(
            "{count} tensors, expected {}",
            shapes.len() * 4
        )));
    }
    let online = r.params(net, "online", &shapes)?;
    let target = r.params(net, "target", &shapes)?;
    let m = r.params(net, "adam.m", &shapes)?.into_flat();
    let v = r.params(net, "adam.v", &shapes)?.into_flat();
    if !r.bytes.is_empty() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(CheckpointBlob {
        seed,
        phase,
        episode,
        global_step,
        online,
        target,
        adam: AdamState { m, v, step: adam_step },
    })
}

pub fn save_checkpoint(path: &Path, blob: &CheckpointBlob) -> Result<()> {
    std::fs::write(path, encode(blob)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint of the reference [`QNetwork::dqn`] architecture.
pub fn load_checkpoint(path: &Path) -> Result<CheckpointBlob> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes, &QNetwork::dqn())?)
}
