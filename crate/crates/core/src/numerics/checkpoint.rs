//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "HRLC"
//! version      u32      1
//! seed         u64
//! config_hash  32 bytes SHA-256 of the canonical config text
//! meta_count   u32
//!   key        u32 length + UTF-8
//!   value      u32 length + UTF-8
//! param_count  u32
//!   name       u32 length + UTF-8
//!   ndim       u32
//!   dims       ndim × u64
//!   step_count u64
//!   value      n × f64
//!   adam_m     n × f64
//!   adam_v     n × f64
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{NumericError, Param, ParamStore, Tensor};
use crate::binio::{DecodeError, Reader, Writer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HRLC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt checkpoint: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("checkpoint does not match the configuration: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub metadata: BTreeMap<String, String>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.seed);
        w.bytes(&self.config_hash);
        w.u32(self.metadata.len() as u32);
        for (k, v) in &self.metadata {
            w.string(k);
            w.string(v);
        }
        w.u32(self.params.len() as u32);
        for p in self.params.iter() {
            w.string(&p.name);
            w.u32(p.value.shape().len() as u32);
            for &d in p.value.shape() {
                w.u64(d as u64);
            }
            w.u64(p.step_count);
            w.f64s(p.value.data());
            w.f64s(p.adam_m.data());
            w.f64s(p.adam_v.data());
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != CHECKPOINT_MAGIC {
            return Err(r.error("bad magic").into());
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(format!("unsupported version {version}")).into());
        }
        let seed = r.u64()?;
        let config_hash = r.array::<32>()?;
        let meta_count = r.count32(8)?;
        let mut metadata = BTreeMap::new();
        for _ in 0..meta_count {
            let k = r.string()?;
            let v = r.string()?;
            if metadata.insert(k, v).is_some() {
                return Err(r.error("duplicate metadata key").into());
            }
        }
        let count = r.count32(16)?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.count32(8)?;
            if ndim == 0 || ndim > 2 {
                return Err(r.error(format!("parameter `{name}` has {ndim} dimensions")).into());
            }
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.count(0)?);
            }
            let at = r.offset();
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|n| n.checked_mul(24).is_some_and(|b| b <= r.remaining()));
            let Some(n) = n else {
                return Err(DecodeError { offset: at, message: format!("parameter `{name}` is truncated") }.into());
            };
            let step_count = r.u64()?;
            let value = r.f64s(n)?;
            let adam_m = r.f64s(n)?;
            let adam_v = r.f64s(n)?;
            if value.iter().chain(&adam_m).chain(&adam_v).any(|v| !v.is_finite()) {
                return Err(r.error(format!("parameter `{name}` holds non-finite values")).into());
            }
            let value = Tensor::new(dims.clone(), value)?;
            let mut p = Param::new(name, value);
            p.adam_m = Tensor::new(dims.clone(), adam_m)?;
            p.adam_v = Tensor::new(dims, adam_v)?;
            p.step_count = step_count;
            if params.id(&p.name).is_some() {
                return Err(r.error(format!("duplicate parameter `{}`", p.name)).into());
            }
            params.insert(p)?;
        }
        if r.remaining() != 0 {
            return Err(r.error("trailing bytes").into());
        }
        Ok(Checkpoint { seed, config_hash, metadata, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}
