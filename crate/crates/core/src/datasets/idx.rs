//! IDX binary format (big-endian headers), the MNIST container.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::LabeledDataset;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.offset as u64,
            message: message.into(),
        }
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let end = self.offset + 4;
        if end > self.bytes.len() {
            return Err(self.err(format!("truncated while reading {what}")));
        }
        let v = u32::from_be_bytes(self.bytes[self.offset..end].try_into().unwrap());
        self.offset = end;
        Ok(v)
    }

    fn take(&mut self, count: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset + count;
        if end > self.bytes.len() {
            return Err(self.err(format!(
                "truncated: {what} needs {count} bytes, {} remain",
                self.bytes.len() - self.offset
            )));
        }
        let s = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(s)
    }
}

/// Loads an IDX image/label pair. Pixels are scaled to `[0, 1]`; the
/// class count is the largest label plus one.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let image_bytes = fs::read(images_path)?;
    let mut r = Reader::new(&image_bytes);
    let magic = r.u32_be("image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("rows")? as usize;
    let cols = r.u32_be("cols")? as usize;
    let dim = rows * cols;
    let mut features = Vec::with_capacity(count);
    for i in 0..count {
        let pixels = r.take(dim, &format!("image {i}"))?;
        features.push(pixels.iter().map(|&p| f64::from(p) / 255.0).collect());
    }

    let label_bytes = fs::read(labels_path)?;
    let mut r = Reader::new(&label_bytes);
    let magic = r.u32_be("label magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let label_count = r.u32_be("label count")? as usize;
    if label_count != count {
        return Err(Error::DimensionMismatch(format!(
            "{count} images vs {label_count} labels"
        )));
    }
    let labels: Vec<usize> = r
        .take(count, "labels")?
        .iter()
        .map(|&l| l as usize)
        .collect();
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    LabeledDataset::new(features, labels, num_classes)
}

/// Writes an IDX image/label pair from raw `rows × cols` byte images.
pub fn write_idx(
    images: &[Vec<u8>],
    rows: usize,
    cols: usize,
    labels: &[u8],
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images vs {} labels",
            images.len(),
            labels.len()
        )));
    }
    let dim = rows * cols;
    if let Some(bad) = images.iter().find(|img| img.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "image of {} bytes, expected {dim}",
            bad.len()
        )));
    }
    let mut img = fs::File::create(images_path)?;
    img.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    img.write_all(&(images.len() as u32).to_be_bytes())?;
    img.write_all(&(rows as u32).to_be_bytes())?;
    img.write_all(&(cols as u32).to_be_bytes())?;
    for image in images {
        img.write_all(image)?;
    }
    let mut lab = fs::File::create(labels_path)?;
    lab.write_all(&LABELS_MAGIC.to_be_bytes())?;
    lab.write_all(&(labels.len() as u32).to_be_bytes())?;
    lab.write_all(labels)?;
    Ok(())
}
