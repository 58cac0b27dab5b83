//! IDX container (big-endian header, raw `u8` payload) as used by the
//! MNIST-family image datasets.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{KcError, Result};
use crate::scalar::Scalar;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, Default)]
pub struct IdxOptions {
    /// Swap image rows and columns (EMNIST files are stored transposed).
    pub transpose: bool,
}

struct IdxTensor {
    dims: Vec<usize>,
    payload: Vec<u8>,
}

fn parse_idx(bytes: Vec<u8>, magic: u32, path: &str) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(KcError::TruncatedPayload {
            path: path.to_string(),
            expected: 4,
            found: bytes.len(),
        });
    }
    let found = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if found != magic {
        return Err(KcError::BadMagic {
            path: path.to_string(),
            expected: magic,
            found,
        });
    }
    let rank = (magic & 0xff) as usize;
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(KcError::TruncatedPayload {
            path: path.to_string(),
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..rank)
        .map(|k| {
            let o = 4 + 4 * k;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(KcError::TruncatedPayload {
            path: path.to_string(),
            expected,
            found: bytes.len(),
        });
    }
    let mut payload = bytes;
    payload.drain(..header);
    Ok(IdxTensor { dims, payload })
}

pub fn load_idx<T: Scalar>(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset<T>> {
    load_idx_with(images, labels, &IdxOptions::default())
}

/// Loads an image tensor and its label vector.
///
/// Pixels are scaled to `[0, 1]`; classes are the distinct label values that
/// occur, in ascending order.
pub fn load_idx_with<T: Scalar>(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    options: &IdxOptions,
) -> Result<Dataset<T>> {
    let ipath = images.as_ref().display().to_string();
    let lpath = labels.as_ref().display().to_string();
    let read = |p: &Path, shown: &str| {
        fs::read(p).map_err(|source| KcError::ReadFile {
            path: shown.to_string(),
            source,
        })
    };
    let img = parse_idx(read(images.as_ref(), &ipath)?, IMAGE_MAGIC, &ipath)?;
    let lab = parse_idx(read(labels.as_ref(), &lpath)?, LABEL_MAGIC, &lpath)?;
    let (n, rows, cols) = (img.dims[0], img.dims[1], img.dims[2]);
    if lab.dims[0] != n {
        return Err(KcError::CountMismatch {
            images: n,
            labels: lab.dims[0],
        });
    }
    if n == 0 || rows * cols == 0 {
        return Err(KcError::EmptyDataset);
    }
    let d = rows * cols;
    let px = |v: u8| T::from_f64_lossy(f64::from(v) / 255.0);
    let features = if options.transpose {
        // output pixel (c, r) of the transposed image reads stored pixel (r, c)
        Array2::from_shape_fn((n, d), |(s, p)| {
            let (c, r) = (p / rows, p % rows);
            px(img.payload[s * d + r * cols + c])
        })
    } else {
        Array2::from_shape_fn((n, d), |(s, p)| px(img.payload[s * d + p]))
    };

    let mut present = [false; 256];
    for &l in &lab.payload {
        present[l as usize] = true;
    }
    let values: Vec<u8> = (0..=255u8).filter(|&v| present[v as usize]).collect();
    let mut index = [usize::MAX; 256];
    for (k, &v) in values.iter().enumerate() {
        index[v as usize] = k;
    }
    let labels = lab.payload.iter().map(|&l| index[l as usize]).collect();
    let class_labels = values.iter().map(|v| v.to_string()).collect();
    let (out_rows, out_cols) = if options.transpose { (cols, rows) } else { (rows, cols) };
    Dataset::new(features, labels, class_labels)?.with_image_shape(out_rows, out_cols)
}

/// Serializes features back into an IDX image tensor, inverting the `/255`
/// scaling. Uses the dataset's image shape, or `1 × d` when it has none.
pub fn encode_idx_images<T: Scalar>(data: &Dataset<T>) -> Vec<u8> {
    let (rows, cols) = data.image_shape().unwrap_or((1, data.n_features()));
    let mut out = Vec::with_capacity(16 + data.n_samples() * data.n_features());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for dim in [data.n_samples(), rows, cols] {
        out.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    for &v in data.features().iter() {
        let px = (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8;
        out.push(px);
    }
    out
}

/// Serializes targets into an IDX label vector. Class labels must be `u8`
/// decimal strings.
pub fn encode_idx_labels<T: Scalar>(data: &Dataset<T>) -> Result<Vec<u8>> {
    let values: Vec<u8> = data
        .class_labels()
        .iter()
        .map(|s| s.parse::<u8>().map_err(|_| KcError::UnknownLabel(s.clone())))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(8 + data.n_samples());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(data.n_samples() as u32).to_be_bytes());
    out.extend(data.labels().iter().map(|&l| values[l]));
    Ok(out)
}
