// SPDX-License-Identifier: Apache-2.0

//! Self-describing dataset file:
//!
//! ```text
//! b"PVDS" | u32 LE version (=1) | u32 LE header length | JSON header
//! n·D little-endian f32 samples (row-major) | n truth bytes
//! ```
//!
//! The header carries name, n, D, p and provenance.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Provenance};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"PVDS";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    name: String,
    n: usize,
    d: usize,
    p: usize,
    provenance: Provenance,
}

pub fn write_dataset(w: &mut impl Write, ds: &Dataset) -> Result<()> {
    if ds.truth.iter().any(|&t| t > u8::MAX as usize) {
        return Err(CoreError::InvalidParameter("class ids above 255 cannot be stored".into()));
    }
    let header = serde_json::to_vec(&Header {
        name: ds.name.clone(),
        n: ds.len(),
        d: ds.dims(),
        p: ds.num_classes(),
        provenance: ds.provenance.clone(),
    })
    .map_err(|e| CoreError::Io(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut block = Vec::with_capacity(ds.samples.as_slice().len() * 4);
    for &v in ds.samples.as_slice() {
        block.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&block)?;
    let truth: Vec<u8> = ds.truth.iter().map(|&t| t as u8).collect();
    w.write_all(&truth)?;
    Ok(())
}

pub fn read_dataset(r: &mut impl Read) -> Result<Dataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let parse = |offset: usize, reason: &str| CoreError::Parse {
        offset: offset as u64,
        reason: reason.into(),
    };
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(parse(0, "not a dataset record"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(parse(4, "unsupported record version"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let hend = 12 + hlen;
    let header: Header = serde_json::from_slice(bytes.get(12..hend).ok_or_else(|| parse(12, "truncated header"))?)
        .map_err(|e| parse(12, &e.to_string()))?;
    let sample_bytes = header.n * header.d * 4;
    let need = hend + sample_bytes + header.n;
    if bytes.len() < need {
        return Err(parse(bytes.len(), "truncated payload"));
    }
    let data: Vec<f64> = bytes[hend..hend + sample_bytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let truth = bytes[hend + sample_bytes..need].iter().map(|&b| b as usize).collect();
    Dataset::new(header.name, Matrix::from_vec(header.n, header.d, data)?, truth, header.provenance)
}

pub fn write_dataset_file(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_dataset(&mut f, ds)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut f = fs::File::open(path)?;
    read_dataset(&mut f)
}
