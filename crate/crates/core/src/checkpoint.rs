//! Versioned checkpoint container.
//!
//! Layout: a text header of two lines (`EMOGEN-CKPT <version>` and
//! `kind <model-kind>`), then little-endian binary sections for the
//! metadata map and the named parameter tensors (row-major f64).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use indexmap::IndexMap;

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "EMOGEN-CKPT";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Named parameter collection plus training metadata for any model kind.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub kind: String,
    pub metadata: IndexMap<String, String>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn new(kind: &str, params: ParamStore) -> Self {
        Checkpoint { kind: kind.to_string(), metadata: IndexMap::new(), params }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_FORMAT_VERSION}\nkind {}\n", self.kind)?;
        w.write_u32::<LittleEndian>(self.metadata.len() as u32)?;
        for (key, value) in &self.metadata {
            write_str(&mut w, key)?;
            write_str(&mut w, value)?;
        }
        w.write_u32::<LittleEndian>(self.params.len() as u32)?;
        for (name, tensor) in self.params.iter() {
            write_str(&mut w, name)?;
            w.write_u32::<LittleEndian>(tensor.shape.len() as u32)?;
            for &dim in &tensor.shape {
                w.write_u64::<LittleEndian>(dim as u64)?;
            }
            for &v in &tensor.values {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let header = read_line(&mut r)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(Error::Format { what: "checkpoint", detail: "bad magic".into() });
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format { what: "checkpoint", detail: "missing version".into() })?;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!("unsupported version {version}"),
            });
        }
        let kind_line = read_line(&mut r)?;
        let kind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| Error::Format { what: "checkpoint", detail: "missing kind line".into() })?
            .to_string();

        let mut metadata = IndexMap::new();
        let n_meta = r.read_u32::<LittleEndian>()?;
        for _ in 0..n_meta {
            let key = read_str(&mut r)?;
            let value = read_str(&mut r)?;
            metadata.insert(key, value);
        }

        let mut params = ParamStore::new();
        let n_params = r.read_u32::<LittleEndian>()?;
        for _ in 0..n_params {
            let name = read_str(&mut r)?;
            let rank = r.read_u32::<LittleEndian>()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u64::<LittleEndian>()? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut values = vec![0.0; numel];
            for v in values.iter_mut() {
                *v = r.read_f64::<LittleEndian>()?;
            }
            params.insert(&name, Tensor::new(values, shape)?)?;
        }
        Ok(Checkpoint { kind, metadata, params })
    }

    /// Write through a temp file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = tmp_sibling(path);
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        Self::read_from(r)
    }

    /// Load and require a specific model kind.
    pub fn load_kind(path: &Path, expected: &str) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if ckpt.kind != expected {
            return Err(Error::KindMismatch { expected: expected.to_string(), found: ckpt.kind });
        }
        Ok(ckpt)
    }
}

/// Atomic file write used by every artifact producer: temp file in the
/// destination directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_sibling(path);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 24 {
        return Err(Error::Format { what: "checkpoint", detail: format!("string length {len}") });
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|e| Error::Format { what: "checkpoint", detail: e.to_string() })
}

fn read_line<R: Read>(r: &mut R) -> Result<String> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        if line.len() > 256 {
            return Err(Error::Format { what: "checkpoint", detail: "unterminated header".into() });
        }
        line.push(byte[0]);
    }
    String::from_utf8(line)
        .map_err(|e| Error::Format { what: "checkpoint", detail: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::InitScheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = ParamStore::new();
        params.register("enc.w", &[3, 4], InitScheme::GlorotUniform, &mut rng).unwrap();
        params.register("enc.b", &[4], InitScheme::Zeros, &mut rng).unwrap();
        let mut ckpt = Checkpoint::new("base", params);
        ckpt.metadata.insert("seed".into(), "11".into());
        ckpt.metadata.insert("hidden".into(), "3".into());
        ckpt
    }

    #[test]
    fn round_trips_bit_exactly() {
        let ckpt = sample_checkpoint();
        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        let loaded = Checkpoint::read_from(&bytes[..]).unwrap();
        assert_eq!(loaded.kind, "base");
        assert_eq!(loaded.metadata, ckpt.metadata);
        assert_eq!(loaded.params, ckpt.params);

        let mut again = Vec::new();
        loaded.write_to(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ckpt.save(&path).unwrap();
        let err = Checkpoint::load_kind(&path, "cvae").unwrap_err();
        assert!(matches!(err, Error::KindMismatch { .. }));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let ckpt = sample_checkpoint();
        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 9);
        assert!(Checkpoint::read_from(&bytes[..]).is_err());
    }
}
