//! Versioned binary checkpoints.
//!
//! ```text
//! "CKPT"  u32 version  u32 len  <ModelConfig as JSON>  u32 epochs_done
//! u32 n_tensors
//! n_tensors x { u16 name_len  name  u8 ndim  ndim x u64  f64 payload }
//! u8 has_optimizer  [ u64 step  m payloads  v payloads ]
//! ```
//!
//! All integers and floats are little-endian; tensors follow the canonical
//! parameter order of the config.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Adam moments in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    /// Completed training epochs; a resumed run continues from here.
    pub epochs_done: usize,
    pub optimizer: Option<OptimizerState>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.params.check_layout(&ckpt.config)?;
    let mut buf = Vec::new();
    buf.write_all(MAGIC)?;
    buf.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(&ckpt.config)?;
    buf.write_all(&(cfg.len() as u32).to_le_bytes())?;
    buf.write_all(&cfg)?;
    buf.write_all(&(ckpt.epochs_done as u32).to_le_bytes())?;
    buf.write_all(&(ckpt.params.len() as u32).to_le_bytes())?;
    for (_, name, t) in ckpt.params.iter() {
        buf.write_all(&(name.len() as u16).to_le_bytes())?;
        buf.write_all(name.as_bytes())?;
        buf.push(t.shape().len() as u8);
        for &d in t.shape() {
            buf.write_all(&(d as u64).to_le_bytes())?;
        }
        write_payload(&mut buf, t);
    }
    match &ckpt.optimizer {
        None => buf.push(0),
        Some(state) => {
            buf.push(1);
            buf.write_all(&state.step.to_le_bytes())?;
            for t in state.m.iter().chain(&state.v) {
                write_payload(&mut buf, t);
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn write_payload(buf: &mut Vec<u8>, t: &Tensor) {
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Reads a checkpoint. With `runtime` set, a checkpoint built for a
/// different configuration is rejected with a field-by-field diff.
pub fn load_checkpoint(path: &Path, runtime: Option<&ModelConfig>) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let mut r = Cursor { bytes: &bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::MalformedHeader("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let cfg_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(cfg_len)?)
        .map_err(|e| Error::MalformedHeader(format!("config block: {e}")))?;
    if let Some(expected) = runtime {
        if let Some(diff) = config.diff(expected) {
            return Err(Error::ConfigMismatch(diff));
        }
    }
    let epochs_done = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::MalformedHeader("tensor name is not UTF-8".into()))?;
        let ndim = r.take(1)?[0] as usize;
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let t = r.tensor(&shape)?;
        entries.push((name, t));
    }
    let params = ModelParams::from_entries(entries);
    params.check_layout(&config)?;
    let optimizer = match r.take(1)?[0] {
        0 => None,
        1 => {
            let step = r.u64()?;
            let shapes: Vec<Vec<usize>> = params.iter().map(|(_, _, t)| t.shape().to_vec()).collect();
            let m = shapes.iter().map(|s| r.tensor(s)).collect::<Result<Vec<_>>>()?;
            let v = shapes.iter().map(|s| r.tensor(s)).collect::<Result<Vec<_>>>()?;
            Some(OptimizerState { step, m, v })
        }
        other => {
            return Err(Error::MalformedHeader(format!("bad optimizer flag {other}")))
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        config,
        params,
        epochs_done,
        optimizer,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "checkpoint ends at byte {}, needed {n} more at {}",
                self.bytes.len(),
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let raw = self.take(n * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(shape.to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        ModelConfig {
            history_len: 4,
            horizon: 2,
            subcarriers: 2,
            pairs: 2,
            scales: vec![1, 3],
            cheb_order: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_with_optimizer_state() {
        let cfg = toy();
        let params = ModelParams::init(&cfg, 3).unwrap();
        let m: Vec<Tensor> = params.iter().map(|(_, _, t)| t.map(|v| v * 0.5)).collect();
        let v: Vec<Tensor> = params.iter().map(|(_, _, t)| t.map(|v| v * v)).collect();
        let ckpt = Checkpoint {
            config: cfg.clone(),
            params,
            epochs_done: 7,
            optimizer: Some(OptimizerState { step: 42, m, v }),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        assert_eq!(load_checkpoint(&path, Some(&cfg)).unwrap(), ckpt);
    }

    #[test]
    fn mismatched_runtime_config_is_rejected() {
        let cfg = toy();
        let ckpt = Checkpoint {
            config: cfg.clone(),
            params: ModelParams::init(&cfg, 3).unwrap(),
            epochs_done: 0,
            optimizer: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        let other = ModelConfig { cheb_order: 3, ..cfg };
        match load_checkpoint(&path, Some(&other)) {
            Err(Error::ConfigMismatch(msg)) => assert!(msg.contains("cheb_order")),
            r => panic!("expected mismatch, got {r:?}"),
        }
    }

    #[test]
    fn garbage_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        fs::write(&path, b"nonsense").unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::MalformedHeader(_))));
    }
}
