//! Versioned binary model checkpoints.
//!
//! Byte layout (version 1, all integers little-endian):
//!
//! ```text
//! magic      4 bytes  b"FLWT"
//! version    u32      1
//! dim_count  u32      number of layer widths (0 when not an MLP)
//! dims       u32 × dim_count
//! layer_count u32
//! per layer: name_len u32, name (UTF-8), start u64, len u64
//! value_count u64
//! values     f64 × value_count (IEEE-754 little-endian)
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{LayerRange, LayerSpec, ModelWeights};

const MAGIC: &[u8; 4] = b"FLWT";
const VERSION: u32 = 1;

/// A model plus the layer widths it was built from (empty for weight
/// vectors that did not come from a [`LayerSpec`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dims: Vec<u32>,
    pub weights: ModelWeights,
}

impl Checkpoint {
    pub fn for_mlp(spec: &LayerSpec, weights: ModelWeights) -> Self {
        Self {
            dims: spec.dims().iter().map(|&d| d as u32).collect(),
            weights,
        }
    }

    /// Rebuilds the layer spec when the dims header is present.
    pub fn layer_spec(&self) -> Option<LayerSpec> {
        if self.dims.len() < 2 {
            return None;
        }
        let dims: Vec<usize> = self.dims.iter().map(|&d| d as usize).collect();
        LayerSpec::new(
            dims[0],
            dims[1..dims.len() - 1].to_vec(),
            dims[dims.len() - 1],
        )
        .ok()
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(checkpoint.dims.len() as u32).to_le_bytes());
    for d in &checkpoint.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    let map = checkpoint.weights.layer_map();
    out.extend_from_slice(&(map.len() as u32).to_le_bytes());
    for range in map {
        out.extend_from_slice(&(range.name.len() as u32).to_le_bytes());
        out.extend_from_slice(range.name.as_bytes());
        out.extend_from_slice(&(range.start as u64).to_le_bytes());
        out.extend_from_slice(&(range.len as u64).to_le_bytes());
    }
    out.extend_from_slice(&(checkpoint.weights.len() as u64).to_le_bytes());
    for v in checkpoint.weights.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, count: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset + count;
        if end > self.bytes.len() {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(s)
    }

    fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64_le(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        offset: 0,
    };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version = r.u32_le("version")?;
    if version != VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let dim_count = r.u32_le("dim count")? as usize;
    let mut dims = Vec::with_capacity(dim_count);
    for _ in 0..dim_count {
        dims.push(r.u32_le("dim")?);
    }
    let layer_count = r.u32_le("layer count")? as usize;
    let mut map = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let name_len = r.u32_le("name length")? as usize;
        let name_offset = r.offset;
        let name = String::from_utf8(r.take(name_len, "layer name")?.to_vec()).map_err(|e| {
            Error::Parse {
                offset: name_offset as u64,
                message: format!("layer name is not UTF-8: {e}"),
            }
        })?;
        let start = r.u64_le("layer start")? as usize;
        let len = r.u64_le("layer len")? as usize;
        map.push(LayerRange { name, start, len });
    }
    let value_count = r.u64_le("value count")? as usize;
    let mut values = Vec::with_capacity(value_count);
    for _ in 0..value_count {
        values.push(f64::from_le_bytes(r.take(8, "value")?.try_into().unwrap()));
    }
    let offset = r.offset as u64;
    let weights = ModelWeights::new(values, map).map_err(|e| Error::Parse {
        offset,
        message: format!("inconsistent checkpoint: {e}"),
    })?;
    Ok(Checkpoint { dims, weights })
}

#[cfg(test)]
mod tests {
    use super::super::init_model;
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let dir = std::env::temp_dir().join("fedcell_ckpt");
        fs::create_dir_all(&dir).unwrap();
        let spec = LayerSpec::new(6, vec![5], 4).unwrap();
        let w = init_model(&spec, 11);
        let ck = Checkpoint::for_mlp(&spec, w);
        let path = dir.join("model.flwt");
        save_checkpoint(&path, &ck).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.layer_spec().unwrap(), spec);
    }

    #[test]
    fn rejects_garbage() {
        let dir = std::env::temp_dir().join("fedcell_ckpt_bad");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.flwt");
        fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { .. })));
    }
}
