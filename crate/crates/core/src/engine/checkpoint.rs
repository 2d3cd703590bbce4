//! `DAN1` parameter checkpoints.
//!
//! Layout, all little-endian: magic `DAN1`, u32 version, u64 config hash,
//! u32 tensor count, then per tensor: u32 name length, UTF-8 name, u32 rank,
//! u64 extents, f64 payload.

use std::io::{Read, Write};
use std::path::Path;

use super::{EngineError, Param, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DAN1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_params(config_hash: u64, params: &[Param]) -> Self {
        Checkpoint {
            config_hash,
            tensors: params.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    /// Copies stored values into `params`, matching by position and name.
    pub fn restore_into(&self, params: &mut [Param]) -> Result<(), EngineError> {
        if self.tensors.len() != params.len() {
            return Err(EngineError::Format(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for ((name, t), p) in self.tensors.iter().zip(params.iter()) {
            if *name != p.name || t.shape() != p.value.shape() {
                return Err(EngineError::Format(format!(
                    "checkpoint tensor `{name}` {:?} does not match parameter `{}` {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        for ((_, t), p) in self.tensors.iter().zip(params.iter_mut()) {
            p.value = t.clone();
        }
        Ok(())
    }
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<(), EngineError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&ck.config_hash.to_le_bytes())?;
    w.write_all(&(ck.tensors.len() as u32).to_le_bytes())?;
    for (name, t) in &ck.tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &e in t.shape() {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N], EngineError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => EngineError::Format("truncated checkpoint".into()),
        _ => EngineError::Io(e),
    })?;
    Ok(b)
}

/// Reads a checkpoint; fails when its config hash differs from `expected_hash`.
pub fn read_checkpoint<R: Read>(r: &mut R, expected_hash: Option<u64>) -> Result<Checkpoint, EngineError> {
    if &take::<4>(r)? != CHECKPOINT_MAGIC {
        return Err(EngineError::Format("bad magic, expected DAN1".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(EngineError::Format(format!("unsupported checkpoint version {version}")));
    }
    let config_hash = u64::from_le_bytes(take(r)?);
    if let Some(h) = expected_hash {
        if h != config_hash {
            return Err(EngineError::Format(format!(
                "model config hash mismatch: checkpoint {config_hash:016x}, expected {h:016x}"
            )));
        }
    }
    let count = u32::from_le_bytes(take(r)?) as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = u32::from_le_bytes(take(r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| EngineError::Format("truncated checkpoint".into()))?;
        let name = String::from_utf8(name).map_err(|_| EngineError::Format("tensor name is not UTF-8".into()))?;
        let rank = u32::from_le_bytes(take(r)?) as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(take(r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            data.push(f64::from_le_bytes(take(r)?));
        }
        let t = Tensor::new(shape, data).map_err(|e| EngineError::Format(format!("tensor `{name}`: {e}")))?;
        tensors.push((name, t));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(EngineError::Format("trailing bytes after last tensor".into()));
    }
    Ok(Checkpoint { config_hash, tensors })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), EngineError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ck)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected_hash: Option<u64>) -> Result<Checkpoint, EngineError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&mut bytes.as_slice(), expected_hash)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            config_hash: 0xdead_beef_0123_4567,
            tensors: vec![
                ("cnn.body.k0".into(), Tensor::new(vec![2, 1, 3], vec![1.5, -0.0, f64::MIN_POSITIVE, 3.0, 1e300, -7.25]).unwrap()),
                ("head.b".into(), Tensor::scalar(0.1)),
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..4], b"DAN1");
        let back = read_checkpoint(&mut buf.as_slice(), Some(sample().config_hash)).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.tensors[0].1.data()[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        let err = read_checkpoint(&mut buf.as_slice(), Some(1)).unwrap_err();
        assert!(err.to_string().contains("hash mismatch"), "{err}");
    }

    #[test]
    fn truncation_and_garbage_are_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample()).unwrap();
        assert!(read_checkpoint(&mut &buf[..buf.len() - 3], None).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_checkpoint(&mut longer.as_slice(), None).is_err());
        buf[0] = b'X';
        assert!(read_checkpoint(&mut buf.as_slice(), None).is_err());
    }

    #[test]
    fn restore_checks_names_and_shapes() {
        let ck = sample();
        let mut params = vec![
            Param::new("cnn.body.k0", Tensor::zeros(&[2, 1, 3]), true),
            Param::new("head.b", Tensor::zeros(&[1]), false),
        ];
        ck.restore_into(&mut params).unwrap();
        assert_eq!(params[1].value.item(), 0.1);
        params[0].name = "other".into();
        assert!(ck.restore_into(&mut params).is_err());
    }
}
