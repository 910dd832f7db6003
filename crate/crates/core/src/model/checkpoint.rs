//! Binary checkpoint format.
//!
//! Layout (little-endian): magic `SWCKPT\0\0`, `u32` version, `u64` length +
//! model config JSON, `f64` input mean, `f64` input std, `u32` tensor count,
//! then per tensor: `u32` name length + UTF-8 name, `u32` rank, `u64` dims,
//! `f64` data in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::ArrayViewD;

use super::params::ModelParams;
use super::ModelConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SWCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

// Upper bounds that keep a corrupt header from triggering huge allocations.
const MAX_JSON: u64 = 1 << 20;
const MAX_NAME: u32 = 1 << 10;
const MAX_ELEMS: u64 = 1 << 31;

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<()> {
    let path = path.as_ref();
    let unwritable = |source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(unwritable)?;
    let mut w = BufWriter::new(file);
    let json = serde_json::to_vec(config)?;
    let mut put = |bytes: &[u8]| w.write_all(bytes);
    (|| -> std::io::Result<()> {
        put(MAGIC)?;
        put(&CHECKPOINT_VERSION.to_le_bytes())?;
        put(&(json.len() as u64).to_le_bytes())?;
        put(&json)?;
        put(&params.input_mean.to_le_bytes())?;
        put(&params.input_std.to_le_bytes())?;
        let tensors = params.tensors();
        put(&(tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &tensors {
            put(&(name.len() as u32).to_le_bytes())?;
            put(name.as_bytes())?;
            put(&(t.ndim() as u32).to_le_bytes())?;
            for &d in t.shape() {
                put(&(d as u64).to_le_bytes())?;
            }
            for v in t.iter() {
                put(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })()
    .map_err(unwritable)?;
    w.flush().map_err(unwritable)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::Truncated,
                _ => Error::Io(e),
            })?;
        Ok(buf)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.bytes(N)?.try_into().expect("exact length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

/// Load a checkpoint and the model configuration stored in it.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, ModelConfig)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    if &r.array::<8>()? != MAGIC {
        return Err(Error::Corrupt("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let json_len = r.u64()?;
    if json_len > MAX_JSON {
        return Err(Error::Corrupt(format!("config length {json_len}")));
    }
    let config: ModelConfig = serde_json::from_slice(&r.bytes(json_len as usize)?)
        .map_err(|e| Error::Corrupt(format!("config: {e}")))?;
    config
        .validate()
        .map_err(|e| Error::Corrupt(format!("stored config: {e}")))?;
    let mut params = ModelParams::zeros(&config);
    params.input_mean = r.f64()?;
    params.input_std = r.f64()?;

    let count = r.u32()? as usize;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(Error::Corrupt(format!(
            "{count} tensors stored, {} expected",
            slots.len()
        )));
    }
    for (name, slot) in slots.iter_mut() {
        let len = r.u32()?;
        if len > MAX_NAME {
            return Err(Error::Corrupt(format!("tensor name length {len}")));
        }
        let stored = String::from_utf8(r.bytes(len as usize)?)
            .map_err(|_| Error::Corrupt("tensor name not UTF-8".into()))?;
        if &stored != name {
            return Err(Error::Corrupt(format!(
                "expected tensor {name}, found {stored}"
            )));
        }
        let rank = r.u32()?;
        if rank > 4 {
            return Err(Error::Corrupt(format!("tensor {name} rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        let mut elems: u64 = 1;
        for _ in 0..rank {
            let d = r.u64()?;
            elems = elems.saturating_mul(d);
            dims.push(d as usize);
        }
        if elems > MAX_ELEMS {
            return Err(Error::Corrupt(format!("tensor {name} too large")));
        }
        if dims != slot.shape() {
            return Err(Error::Corrupt(format!(
                "tensor {name} stored as {dims:?}, config implies {:?}",
                slot.shape()
            )));
        }
        for v in slot.iter_mut() {
            *v = r.f64()?;
        }
    }
    drop(slots);
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    Ok((params, config))
}

fn describe(t: &ArrayViewD<f64>) -> String {
    format!("{:?}", t.shape())
}

/// Load a checkpoint and check it against an expected configuration.
pub fn load_checkpoint_for(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<ModelParams> {
    let (params, stored) = load_checkpoint(path)?;
    if &stored != expected {
        let want = ModelParams::zeros(expected);
        let mismatch = want
            .tensors()
            .iter()
            .zip(params.tensors())
            .find(|((_, a), (_, b))| a.shape() != b.shape())
            .map(|((n, a), (_, b))| {
                format!("{n}: expected {}, found {}", describe(a), describe(&b))
            })
            .unwrap_or_else(|| "model configuration differs".into());
        return Err(Error::ShapeMismatch(mismatch));
    }
    Ok(params)
}
