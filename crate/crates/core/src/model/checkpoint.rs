//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic "UNETCKP1" (8 bytes)
//! format version u32
//! tensor count u32
//! per tensor: name length u16, UTF-8 name, rank u8, extents u32 x rank, f32 data
//! CRC32 (IEEE) of every preceding byte, u32
//! ```
//!
//! Only parameters are stored. Loading requires the architecture the
//! checkpoint was written for; names and shapes must match it exactly.

use std::io::Write;
use std::path::Path;

use super::arch::Architecture;
use super::graph::{ModelGraph, ParamRegistry};
use super::{ModelKind, UNetConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"UNETCKP1";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(g: &ModelGraph<T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let count = u32::try_from(g.parameters().count())
        .map_err(|_| Error::Checkpoint("too many tensors".into()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for (name, t) in g.parameters() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Checkpoint(format!("name too long: {name}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(t.dims().len() as u8);
        for &d in t.dims() {
            let d = u32::try_from(d).map_err(|_| Error::Checkpoint(format!("extent of {name} exceeds u32")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.reserve(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

/// Parses a checkpoint into named `f32` tensors, validating framing and CRC.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamRegistry<f32>> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < MAGIC.len() + 12 {
        return Err(bad("file too short"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(bad("CRC mismatch (truncated or corrupted file)"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = ParamRegistry::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| bad("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad("tensor extents overflow"))?;
        let raw = r.take(numel.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&dims, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        if out.insert(name.clone(), t).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    if r.pos != body.len() {
        return Err(bad("trailing bytes after last tensor"));
    }
    Ok(out)
}

/// Writes atomically: a temporary file in the target directory is renamed
/// over `path` only after a complete write.
pub fn save_checkpoint<T: Scalar>(g: &ModelGraph<T>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(g)?;
    write_atomic(path, &bytes)
}

pub fn load_checkpoint<T: Scalar>(path: &Path, kind: ModelKind, cfg: &UNetConfig) -> Result<ModelGraph<T>> {
    let bytes = std::fs::read(path)?;
    let arch = Architecture::new(kind, cfg)?;
    let tensors = decode_checkpoint(&bytes)?;
    let params: ParamRegistry<T> = tensors.into_iter().map(|(n, t)| (n, t.cast())).collect();
    ModelGraph::from_parameters(arch, params).map_err(|e| {
        Error::Checkpoint(format!("checkpoint does not fit {kind} with {cfg:?}: {e}"))
    })
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_unet;
    use crate::tensor::Rng;

    fn tiny() -> ModelGraph<f32> {
        build_unet(&UNetConfig::scaled(16, 2), &mut Rng::new(3)).unwrap()
    }

    #[test]
    fn encode_decode_restores_bits() {
        let g = tiny();
        let decoded = decode_checkpoint(&encode_checkpoint(&g).unwrap()).unwrap();
        for ((n, t), (dn, dt)) in g.parameters().zip(&decoded) {
            assert_eq!(n, dn);
            assert_eq!(t.dims(), dt.dims());
            let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = dt.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_checkpoint(&tiny()).unwrap();
        assert_eq!(&bytes[..8], b"UNETCKP1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(count as usize, tiny().parameters().count());
        let name_len = u16::from_le_bytes(bytes[16..18].try_into().unwrap()) as usize;
        assert_eq!(&bytes[18..18 + name_len], b"enc1.conv1.kernel");
        assert_eq!(bytes[18 + name_len], 4);
    }

    #[test]
    fn corruption_detected() {
        let bytes = encode_checkpoint(&tiny()).unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode_checkpoint(&bad_magic).is_err());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 10]).is_err());
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(decode_checkpoint(&flipped).is_err());
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode_checkpoint(&tiny()).unwrap();
        bytes[8] = 2;
        let n = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..n]);
        bytes[n..].copy_from_slice(&crc.to_le_bytes());
        let err = decode_checkpoint(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
