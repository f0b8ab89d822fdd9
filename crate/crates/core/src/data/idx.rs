//! IDX (big-endian) image and label files.
//!
//! Only the unsigned-byte flavors appear here: magic 0x00000803 for image
//! stacks (n, rows, cols) and 0x00000801 for label vectors. Loading maps
//! pixels to [-1, 1] and resizes to the 32x32 input contract.

use std::path::Path;

use crate::data::dataset::{bilinear_resize, byte_to_signed, Dataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw parse of an image file: pixel bytes untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize, source: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Truncated { source_name: source.into(), needed: end, found: bytes.len() });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, source)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::BadMagic { expected: IDX_IMAGE_MAGIC, found: magic });
    }
    let n = be_u32(bytes, 4, source)? as usize;
    let rows = be_u32(bytes, 8, source)? as usize;
    let cols = be_u32(bytes, 12, source)? as usize;
    let needed = 16 + n * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated { source_name: source.into(), needed, found: bytes.len() });
    }
    Ok(IdxImages { n, rows, cols, pixels: bytes[16..needed].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8], source: &str) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, source)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::BadMagic { expected: IDX_LABEL_MAGIC, found: magic });
    }
    let n = be_u32(bytes, 4, source)? as usize;
    let needed = 8 + n;
    if bytes.len() < needed {
        return Err(Error::Truncated { source_name: source.into(), needed, found: bytes.len() });
    }
    Ok(bytes[8..needed].to_vec())
}

/// Byte-exact inverse of the loader's affine rescale, for raw (unresized)
/// image tensors.
pub fn images_to_bytes(raw: &Tensor<f64>) -> Vec<u8> {
    raw.data().iter().map(|&v| crate::data::dataset::signed_to_byte(v)).collect()
}

/// Raw images as a float tensor (n, 1, rows, cols) in [-1, 1], no resize.
pub fn images_to_tensor(raw: &IdxImages) -> Result<Tensor<f64>> {
    Tensor::new(
        vec![raw.n, 1, raw.rows, raw.cols],
        raw.pixels.iter().map(|&p| byte_to_signed(p)).collect(),
    )
}

/// Loads an IDX image file (optionally with labels) into the (n,1,32,32)
/// input contract.
pub fn load_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let raw = parse_idx_images(&image_bytes, &images_path.display().to_string())?;
    let labels = match labels_path {
        Some(p) => {
            let label_bytes = std::fs::read(p)?;
            let labels = parse_idx_labels(&label_bytes, &p.display().to_string())?;
            if labels.len() != raw.n {
                return Err(Error::CountMismatch { images: raw.n, labels: labels.len() });
            }
            Some(labels)
        }
        None => None,
    };
    let tensor = images_to_tensor(&raw)?;
    let resized = bilinear_resize(&tensor, 32, 32)?;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(resized, labels, name)
}

/// Writes an image stack in IDX layout.
pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let per = rows * cols;
    if per == 0 || pixels.len() % per != 0 {
        return Err(Error::Format(format!(
            "pixel payload {} not a multiple of {rows}x{cols}",
            pixels.len()
        )));
    }
    let n = pixels.len() / per;
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out)?;
    Ok(())
}
