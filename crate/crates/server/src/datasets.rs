// SPDX-License-Identifier: Apache-2.0

//! Dataset requests accepted by the service and the catalog behind
//! `GET /datasets`.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use pvil_core::datasets::{generate, load_mnist_idx, read_dataset_file, Dataset, Provenance};

use crate::error::{ApiError, Result};

pub const GENERATORS: [&str; 3] = ["two_moons", "x_shape", "four_gaussians"];
pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_LABELS: &str = "train-labels-idx1-ubyte";
pub const RECORD_EXTENSION: &str = "pvds";

fn default_subset() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Generator {
        name: String,
        n: usize,
        #[serde(default)]
        noise: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    /// A dataset record stored under `<data-dir>/datasets/<name>.pvds`.
    File { name: String },
    Mnist {
        #[serde(default = "default_subset")]
        subset: usize,
        #[serde(default)]
        seed: u64,
    },
}

/// Whether the labels attached to a dataset are ground truth: generated
/// classes or an IDX label file somewhere up the provenance chain.
pub fn carries_truth(p: &Provenance) -> bool {
    match p {
        Provenance::Generator { .. } => true,
        Provenance::Subset { parent, .. } => carries_truth(parent),
        Provenance::Files { paths } => paths.iter().any(|p| p.ends_with(MNIST_LABELS)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub name: String,
    pub classes: usize,
    pub default_noise: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub n: usize,
    pub dims: usize,
    pub classes: usize,
    pub has_truth: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogPayload {
    pub generators: Vec<GeneratorEntry>,
    pub files: Vec<FileEntry>,
    pub mnist_available: bool,
}

pub struct Catalog {
    data_dir: Option<PathBuf>,
    mnist_dir: PathBuf,
    mnist: Mutex<Option<Arc<Dataset>>>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Catalog {
    pub fn new(data_dir: Option<PathBuf>, mnist_dir: PathBuf) -> Self {
        Self {
            data_dir,
            mnist_dir,
            mnist: Mutex::new(None),
        }
    }

    fn files_dir(&self) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join("datasets"))
    }

    fn mnist_present(&self) -> bool {
        [MNIST_IMAGES, MNIST_LABELS].iter().all(|f| self.mnist_dir.join(f).is_file())
    }

    fn full_mnist(&self) -> Result<Arc<Dataset>> {
        let mut cache = self.mnist.lock().unwrap();
        if let Some(ds) = cache.as_ref() {
            return Ok(ds.clone());
        }
        if !self.mnist_present() {
            return Err(ApiError::not_found(format!(
                "MNIST needs {MNIST_IMAGES} and {MNIST_LABELS} in {}",
                self.mnist_dir.display()
            )));
        }
        let ds = Arc::new(load_mnist_idx(self.mnist_dir.join(MNIST_IMAGES), self.mnist_dir.join(MNIST_LABELS))?);
        *cache = Some(ds.clone());
        Ok(ds)
    }

    fn record_path(&self, name: &str) -> Result<PathBuf> {
        if !valid_name(name) {
            return Err(ApiError::invalid(format!("dataset file name '{name}' may only use letters, digits, '_' and '-'")));
        }
        let dir = self
            .files_dir()
            .ok_or_else(|| ApiError::not_found("no data directory is configured for dataset files"))?;
        Ok(dir.join(format!("{name}.{RECORD_EXTENSION}")))
    }

    pub fn resolve(&self, spec: &DatasetSpec) -> Result<Dataset> {
        match spec {
            DatasetSpec::Generator { name, n, noise, seed } => Ok(generate(name, *n, *noise, *seed)?),
            DatasetSpec::File { name } => {
                let path = self.record_path(name)?;
                if !path.is_file() {
                    return Err(ApiError::not_found(format!("no dataset file '{name}'")));
                }
                Ok(read_dataset_file(path)?)
            }
            DatasetSpec::Mnist { subset, seed } => {
                let full = self.full_mnist()?;
                if *subset == 0 {
                    return Err(ApiError::invalid("MNIST subset must be positive"));
                }
                Ok(full.random_subset(*subset, *seed))
            }
        }
    }

    pub fn listing(&self) -> CatalogPayload {
        let generators = GENERATORS
            .iter()
            .map(|&name| {
                let probe = generate(name, 8, None, 0).ok();
                GeneratorEntry {
                    name: name.into(),
                    classes: probe.map_or(0, |d| d.num_classes()),
                    default_noise: match name {
                        "two_moons" => Some(0.08),
                        "x_shape" => Some(0.05),
                        _ => None,
                    },
                }
            })
            .collect();
        let mut files = Vec::new();
        if let Some(dir) = self.files_dir() {
            if let Ok(entries) = std::fs::read_dir(&dir) {
                let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
                paths.sort();
                for p in paths {
                    if let Some(entry) = file_entry(&p) {
                        files.push(entry);
                    }
                }
            }
        }
        CatalogPayload {
            generators,
            files,
            mnist_available: self.mnist_present(),
        }
    }
}

fn file_entry(path: &Path) -> Option<FileEntry> {
    if path.extension()? != RECORD_EXTENSION {
        return None;
    }
    let name = path.file_stem()?.to_str()?.to_string();
    if !valid_name(&name) {
        return None;
    }
    let ds = read_dataset_file(path).ok()?;
    Some(FileEntry {
        name,
        n: ds.len(),
        dims: ds.dims(),
        classes: ds.num_classes(),
        has_truth: carries_truth(&ds.provenance),
    })
}
