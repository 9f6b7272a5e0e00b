//! Binary checkpoint container.
//!
//! Layout (little-endian): 8-byte magic, `u32` version, `u64` length plus
//! JSON metadata, `u32` tensor count, then per tensor its name, trainable
//! flag, shape and `f64` payload. A SHA-256 digest of everything before it
//! closes the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Loss, NetConfig, Target};
use super::params::{Param, Params};
use super::train::Model;
use crate::error::{Error, Result};
use crate::preprocess::Preprocess;

pub const MAGIC: &[u8; 8] = b"HMOTCKPT";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    net: NetConfig,
    loss: Loss,
    preprocess: String,
    target: Target,
    /// Order of the input pipeline during training.
    pipeline: String,
    library_version: String,
}

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let meta = Meta {
        net: model.net.clone(),
        loss: model.loss,
        preprocess: model.preprocess.to_string(),
        target: model.target,
        pipeline: "preprocess_then_augment".into(),
        library_version: env!("CARGO_PKG_VERSION").into(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(model.params.tensors.len() as u32).to_le_bytes());
    for p in &model.params.tensors {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.trainable as u8);
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.bad("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= limit)
            .ok_or_else(|| self.bad(format!("implausible length {n}")))
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Model> {
    let bad = |reason: &str| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }
    let mut r = Reader { buf: body, pos: 8, path };
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let json_len = r.len(body.len())?;
    let meta: Meta = serde_json::from_slice(r.take(json_len)?).map_err(|e| bad(&format!("metadata: {e}")))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
        let trainable = match r.take(1)?[0] {
            0 => false,
            1 => true,
            f => return Err(bad(&format!("bad trainable flag {f}"))),
        };
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.len(body.len())).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Param {
            name,
            shape,
            data,
            trainable,
        });
    }
    if r.pos != body.len() {
        return Err(bad("trailing bytes after tensors"));
    }
    let params = Params { tensors };
    params.check_matches(&meta.net)?;
    let preprocess: Preprocess = meta.preprocess.parse()?;
    let mut model = Model::new(meta.net, meta.loss, preprocess, meta.target)?;
    model.params = params;
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::config::Norm;
    use crate::softbin::BinGrid;

    fn model() -> Model {
        let net = NetConfig {
            block_channels: vec![2, 2],
            head_channels: 3,
            norm: Norm::Batch,
            ..NetConfig::desk()
        };
        Model::new(net, Loss::softbin(BinGrid::default()), Preprocess::Robust, Target::Drift).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = encode_checkpoint(&m).unwrap();
        let back = decode_checkpoint(&bytes, Path::new("m.ckpt")).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_checkpoint(&model()).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(matches!(
            decode_checkpoint(&bytes, Path::new("m")),
            Err(Error::ChecksumMismatch(_))
        ));
        assert!(matches!(
            decode_checkpoint(b"not a checkpoint at all, clearly not", Path::new("m")),
            Err(Error::Checkpoint { .. })
        ));
    }
}
