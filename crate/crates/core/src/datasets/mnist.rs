// SPDX-License-Identifier: Apache-2.0

//! IDX files as distributed for MNIST (uncompressed). All header integers
//! are big-endian u32; pixels are unsigned bytes in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Provenance};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw image block of an IDX3 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| CoreError::Parse {
            offset: offset as u64,
            reason: "truncated header".into(),
        })
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(CoreError::Parse {
            offset: 0,
            reason: format!("image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(CoreError::Parse {
            offset: bytes.len() as u64,
            reason: format!("image payload truncated: {} of {need} bytes", payload.len()),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload[..need].to_vec(),
    })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(CoreError::Parse {
            offset: 0,
            reason: format!("label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(CoreError::Parse {
            offset: bytes.len() as u64,
            reason: format!("label payload truncated: {} of {count} bytes", payload.len()),
        });
    }
    Ok(payload[..count].to_vec())
}

pub fn write_idx_images(w: &mut impl Write, images: &IdxImages) -> Result<()> {
    w.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [images.count, images.rows, images.cols] {
        w.write_all(&(v as u32).to_be_bytes())?;
    }
    w.write_all(&images.pixels)?;
    Ok(())
}

pub fn write_idx_labels(w: &mut impl Write, labels: &[u8]) -> Result<()> {
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}

/// Loads an image/label file pair; pixels are scaled to [0, 1].
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_idx_images(&fs::read(ip).map_err(|e| CoreError::Io(format!("{}: {e}", ip.display())))?)?;
    let labels = read_idx_labels(&fs::read(lp).map_err(|e| CoreError::Io(format!("{}: {e}", lp.display())))?)?;
    if images.count != labels.len() {
        return Err(CoreError::Parse {
            offset: 4,
            reason: format!("{} images but {} labels", images.count, labels.len()),
        });
    }
    let dims = images.rows * images.cols;
    let data: Vec<f64> = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(
        "mnist",
        Matrix::from_vec(images.count, dims, data)?,
        labels.iter().map(|&l| l as usize).collect(),
        Provenance::Files {
            paths: vec![ip.display().to_string(), lp.display().to_string()],
        },
    )
}
