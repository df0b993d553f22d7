//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "JKPE" | version u32 | K u32 | d u32 | d_out u32 | provider u8
//! [provider == 0] vocab_count u32 { len u32, utf8 bytes }*
//! tensor_count u32 { name_len u32, name, rank u32, dims u32*rank, f64 data }*
//! sha256(all preceding bytes)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ConvFilter, Linear, ModelParams, ModelShape};
use crate::encoder::LookupProvider;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"JKPE";
pub const FORMAT_VERSION: u32 = 1;

const PROVIDER_LOOKUP: u8 = 0;
const PROVIDER_EXTERNAL: u8 = 1;
const DIGEST_LEN: usize = 32;

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(buf, s.len())?;
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn tensor_dims(params: &ModelParams, name: &str, len: usize) -> Vec<usize> {
    let ModelShape { d, d_out, .. } = params.shape;
    if name == "embedding" {
        vec![len / d, d]
    } else if name.ends_with(".weight") && name.starts_with("conv.") {
        vec![d_out, len / d_out]
    } else if name.ends_with(".bias") && !name.starts_with("conv.") {
        vec![]
    } else {
        vec![len]
    }
}

pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_u32(&mut buf, params.shape.k_max)?;
    put_u32(&mut buf, params.shape.d)?;
    put_u32(&mut buf, params.shape.d_out)?;
    match &params.lookup {
        Some(lookup) => {
            buf.push(PROVIDER_LOOKUP);
            put_u32(&mut buf, lookup.vocabulary().len())?;
            for t in lookup.vocabulary() {
                put_str(&mut buf, t)?;
            }
        }
        None => buf.push(PROVIDER_EXTERNAL),
    }
    let mut tensors = Vec::new();
    params.for_each_tensor(|name, data| tensors.push((name.to_string(), data.to_vec())));
    put_u32(&mut buf, tensors.len())?;
    for (name, data) in &tensors {
        put_str(&mut buf, name)?;
        let dims = tensor_dims(params, name, data.len());
        put_u32(&mut buf, dims.len())?;
        for &dim in &dims {
            put_u32(&mut buf, dim)?;
        }
        for x in data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

/// Write atomically: the target is replaced only once the file is complete.
pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(&bytes).map_err(|e| Error::io(&tmp.0, e))?;
    tmp.1.sync_all().map_err(|e| Error::io(&tmp.0, e))?;
    drop(tmp.1);
    fs::rename(&tmp.0, path).map_err(|e| Error::io(path, e))
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, fs::File)> {
    let stem = target.file_name().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    let tmp = dir.join(format!(".{stem}.{}.tmp", std::process::id()));
    let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    Ok((tmp, f))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch; file is corrupted".into()));
    }

    let mut r = Reader { buf: body, pos: 8 };
    let shape = ModelShape {
        k_max: r.u32()?,
        d: r.u32()?,
        d_out: r.u32()?,
    };
    shape.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    let vocab = match r.u8()? {
        PROVIDER_LOOKUP => {
            let n = r.u32()?;
            let mut v = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                v.push(r.string()?);
            }
            Some(v)
        }
        PROVIDER_EXTERNAL => None,
        other => return Err(Error::Checkpoint(format!("unknown provider kind {other}"))),
    };

    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()?;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32()?);
        }
        let len = dims.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        let len = len.ok_or_else(|| Error::Checkpoint(format!("tensor {name} too large")))?;
        tensors.push((name, dims, r.f64s(len)?));
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after tensors".into()));
    }

    // Rebuild a skeleton of the expected structure, then fill it by name.
    let mut params = ModelParams {
        shape,
        lookup: None,
        conv: (1..=shape.k_max)
            .map(|k| ConvFilter {
                k,
                weight: vec![0.0; shape.d_out * k * shape.d],
                bias: vec![0.0; shape.d_out],
            })
            .collect(),
        score: Linear {
            weight: vec![0.0; shape.d_out],
            bias: 0.0,
        },
        chunk: Linear {
            weight: vec![0.0; shape.d_out],
            bias: 0.0,
        },
    };
    if let Some(vocab) = vocab {
        let rows = vocab.len() + 1;
        params.lookup = Some(LookupProvider::from_parts(vocab, Matrix::zeros(rows, shape.d))?);
    }
    let expected = params.tensor_names();
    if expected.len() != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            tensors.len()
        )));
    }
    let mut shape_error = None;
    let mut iter = tensors.into_iter();
    let skeleton = params.clone();
    params.for_each_tensor_mut(|name, slot| {
        let (found, dims, data) = iter.next().unwrap();
        if shape_error.is_some() {
            return;
        }
        let want = tensor_dims(&skeleton, name, slot.len());
        if found != name || dims != want || data.len() != slot.len() {
            shape_error = Some(format!(
                "tensor {found:?} {dims:?} does not match expected {name:?} {want:?}"
            ));
            return;
        }
        slot.copy_from_slice(&data);
    });
    if let Some(msg) = shape_error {
        return Err(Error::Checkpoint(msg));
    }
    Ok(params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

impl ModelParams {
    /// Reject a checkpoint whose recorded shape differs from the configured one.
    pub fn expect_shape(&self, expected: &ModelShape) -> Result<()> {
        let s = &self.shape;
        let mut diffs = Vec::new();
        for (name, got, want) in [("K", s.k_max, expected.k_max), ("d", s.d, expected.d), ("d_out", s.d_out, expected.d_out)] {
            if got != want {
                diffs.push(format!("{name} is {got} in the checkpoint but {want} in the configuration"));
            }
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(diffs.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_lookup;

    fn sample(lookup: bool) -> ModelParams {
        let l = lookup.then(|| init_lookup(["alpha", "beta", "γάμμα"], 3, 4).unwrap());
        let mut p = ModelParams::init(ModelShape { k_max: 3, d: 3, d_out: 4 }, l, 11).unwrap();
        p.score.bias = -1.0 / 3.0;
        p.chunk.bias = f64::MIN_POSITIVE;
        p
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for lookup in [true, false] {
            let p = sample(lookup);
            let a = dir.path().join("a.jkpe");
            let b = dir.path().join("b.jkpe");
            save_checkpoint(&p, &a).unwrap();
            let loaded = load_checkpoint(&a).unwrap();
            assert_eq!(loaded, p);
            save_checkpoint(&loaded, &b).unwrap();
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = sample(true);
        p.shape.k_max = 5;
        p.conv = ModelParams::init(ModelShape { k_max: 5, d: 3, d_out: 4 }, None, 1).unwrap().conv;
        let loaded = decode_checkpoint(&encode_checkpoint(&p).unwrap()).unwrap();
        let err = loaded.expect_shape(&ModelShape { k_max: 3, d: 3, d_out: 4 }).unwrap_err();
        assert!(err.to_string().contains("K is 5"));
    }

    #[test]
    fn corruption_never_yields_a_model() {
        let bytes = encode_checkpoint(&sample(true)).unwrap();
        for i in [0, 5, 20, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(decode_checkpoint(&bad).is_err(), "flip at {i}");
        }
        assert!(decode_checkpoint(&bytes[..bytes.len() - 7]).is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(decode_checkpoint(&v2).unwrap_err().to_string().contains("version 2"));
    }
}
