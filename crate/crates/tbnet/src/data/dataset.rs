//! Sample sources feeding the trainer and evaluator.

use std::path::PathBuf;

use super::augment::{augment, derive_sample_seed};
use super::image::GrayImage;
use super::preprocess::{preprocess, PreprocessSpec};
use super::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A labelled image collection. Preprocessing is deterministic; training
/// augmentation derives a per-sample seed from (seed, index, epoch), so any
/// loading order or parallelism produces identical tensors.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Class index of sample `idx` (0 negative, 1 positive).
    fn label(&self, idx: usize) -> usize;

    /// `[1,1,H,W]` image for sample `idx`. With `augmented`, applies the
    /// seeded training augmentation for the given epoch.
    fn image(&self, idx: usize, epoch: usize, augmented: bool) -> Result<Tensor>;
}

/// Images held directly in memory (synthetic sets, tests).
pub struct InMemoryDataset {
    images: Vec<Tensor>,
    labels: Vec<usize>,
    augment_seed: u64,
}

impl InMemoryDataset {
    pub fn new(images: Vec<Tensor>, labels: Vec<usize>, augment_seed: u64) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Train(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        for l in &labels {
            if *l > 1 {
                return Err(Error::InvalidClassLabel(*l as i64));
            }
        }
        Ok(InMemoryDataset {
            images,
            labels,
            augment_seed,
        })
    }
}

impl SampleSource for InMemoryDataset {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    fn image(&self, idx: usize, epoch: usize, augmented: bool) -> Result<Tensor> {
        let img = &self.images[idx];
        if augmented {
            augment(img, derive_sample_seed(self.augment_seed, idx as u64, epoch as u64))
        } else {
            Ok(img.clone())
        }
    }
}

/// Manifest-backed dataset: decodes and preprocesses every image of one
/// split eagerly, keeping the preprocessed tensors cached.
pub struct ManifestDataset {
    images: Vec<Tensor>,
    labels: Vec<usize>,
    paths: Vec<PathBuf>,
    augment_seed: u64,
}

impl ManifestDataset {
    pub fn load(
        manifest: &DatasetManifest,
        split: Split,
        spec: &PreprocessSpec,
        augment_seed: u64,
    ) -> Result<Self> {
        let records = manifest.split_records(split);
        if records.is_empty() {
            return Err(Error::EmptySplit {
                split: split.to_string(),
            });
        }
        let mut images = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        let mut paths = Vec::with_capacity(records.len());
        for r in records {
            let gray = GrayImage::open(&r.image_path)?;
            images.push(preprocess(&gray, spec)?);
            labels.push(r.label.as_index());
            paths.push(r.image_path.clone());
        }
        Ok(ManifestDataset {
            images,
            labels,
            paths,
            augment_seed,
        })
    }

    pub fn path(&self, idx: usize) -> &PathBuf {
        &self.paths[idx]
    }
}

impl SampleSource for ManifestDataset {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    fn image(&self, idx: usize, epoch: usize, augmented: bool) -> Result<Tensor> {
        let img = &self.images[idx];
        if augmented {
            augment(img, derive_sample_seed(self.augment_seed, idx as u64, epoch as u64))
        } else {
            Ok(img.clone())
        }
    }
}

/// Stacks per-sample `[1,1,H,W]` tensors into one `[B,1,H,W]` batch.
pub fn stack_batch(images: &[Tensor]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| Error::Train("empty batch".into()))?;
    let shape = first.shape();
    let mut data = Vec::with_capacity(first.numel() * images.len());
    for img in images {
        if img.shape() != shape {
            return Err(Error::Shape {
                op: "stack_batch",
                msg: format!("sample shape {:?} differs from {:?}", img.shape(), shape),
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec(&[images.len(), shape[1], shape[2], shape[3]], data)
}
