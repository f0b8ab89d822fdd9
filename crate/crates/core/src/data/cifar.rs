//! CIFAR-10 binary batches: records of 1 label byte followed by 3072
//! pixel bytes (1024 per channel, R then G then B, row-major 32x32).

use std::path::Path;

use crate::data::dataset::{byte_to_signed, Dataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CIFAR_RECORD_LEN: usize = 3073;
pub const CIFAR_PIXELS: usize = 3072;

/// Loads one or more CIFAR-10 batch files into an (n,3,32,32) dataset.
pub fn load_cifar10(paths: &[impl AsRef<Path>]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::Config("no CIFAR batch files given".into()));
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let (i, l) = parse_cifar_records(&bytes, &path.display().to_string())?;
        images.extend(i);
        labels.extend(l);
    }
    let n = labels.len();
    let tensor = Tensor::new(vec![n, 3, 32, 32], images)?;
    Dataset::new(tensor, Some(labels), "cifar10")
}

/// Parses raw batch bytes into signed pixels (channel-major per example)
/// and labels.
pub fn parse_cifar_records(bytes: &[u8], source: &str) -> Result<(Vec<f64>, Vec<u8>)> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        return Err(Error::Format(format!(
            "{source}: length {} is not a positive multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut images = Vec::with_capacity(n * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        let label = rec[0];
        if label > 9 {
            return Err(Error::Format(format!("{source}: label byte {label} outside 0..=9")));
        }
        labels.push(label);
        images.extend(rec[1..].iter().map(|&p| byte_to_signed(p)));
    }
    Ok((images, labels))
}

/// Serializes images+labels back to record bytes; inverse of the parser
/// for byte-valued pixels.
pub fn to_cifar_records(images: &Tensor<f64>, labels: &[u8]) -> Result<Vec<u8>> {
    if images.rank() != 4 || images.dim(1) != 3 || images.row_len() != CIFAR_PIXELS {
        return Err(Error::InvalidShape {
            shape: images.shape().to_vec(),
            message: "CIFAR records need (n, 3, 32, 32)".into(),
        });
    }
    if images.dim(0) != labels.len() {
        return Err(Error::CountMismatch { images: images.dim(0), labels: labels.len() });
    }
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD_LEN);
    for (e, &label) in labels.iter().enumerate() {
        out.push(label);
        let start = e * CIFAR_PIXELS;
        out.extend(
            images.data()[start..start + CIFAR_PIXELS]
                .iter()
                .map(|&v| crate::data::dataset::signed_to_byte(v)),
        );
    }
    Ok(out)
}
