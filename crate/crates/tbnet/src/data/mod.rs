//! Dataset manifests, preprocessing, augmentation, and the stratified
//! train/val/test split.
//!
//! Manifest format: UTF-8 CSV with header `path,label[,split]`. Labels are
//! `0`/`1` or `negative`/`positive`; relative paths resolve against the
//! manifest's directory.

pub mod augment;
pub mod dataset;
mod image;
pub mod preprocess;

pub use self::image::{bilinear_resize, GrayImage};
pub use augment::{augment, augment_with, derive_sample_seed, AugmentDraw};
pub use dataset::{InMemoryDataset, ManifestDataset, SampleSource};
pub use preprocess::{preprocess, PreprocessSpec};

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary screening label; the positive class is TB positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative = 0,
    Positive = 1,
}

impl Label {
    pub fn as_index(self) -> usize {
        self as usize
    }

    fn parse(token: &str, row: usize) -> Result<Label> {
        match token.trim() {
            "0" => Ok(Label::Negative),
            "1" => Ok(Label::Positive),
            t if t.eq_ignore_ascii_case("negative") => Ok(Label::Negative),
            t if t.eq_ignore_ascii_case("positive") => Ok(Label::Positive),
            other => Err(Error::UnknownLabel {
                row,
                token: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => write!(f, "negative"),
            Label::Positive => write!(f, "positive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn parse(token: &str, row: usize) -> Result<Split> {
        match token.trim() {
            t if t.eq_ignore_ascii_case("train") => Ok(Split::Train),
            t if t.eq_ignore_ascii_case("val") => Ok(Split::Val),
            t if t.eq_ignore_ascii_case("test") => Ok(Split::Test),
            other => Err(Error::ManifestFormat {
                row,
                msg: format!("unknown split token {other:?} (expected train/val/test)"),
            }),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Split> {
        Split::parse(s, 0)
    }
}

#[derive(Debug, Clone)]
pub struct ManifestRecord {
    pub image_path: PathBuf,
    pub label: Label,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn split_records(&self, split: Split) -> Vec<&ManifestRecord> {
        self.records
            .iter()
            .filter(|r| r.split == Some(split))
            .collect()
    }
}

/// Loads and validates a manifest CSV. Rows are numbered from 1 (the
/// header). Fails on unknown label tokens, duplicate paths, and files that
/// do not exist; image decodability is checked when images are loaded.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::new();
    let mut seen: HashSet<PathBuf> = HashSet::new();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::ManifestFormat {
        row: 1,
        msg: "empty manifest".into(),
    })?;
    let header = header.trim_start_matches('\u{feff}');
    let head_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if head_fields.len() < 2
        || !head_fields[0].eq_ignore_ascii_case("path")
        || !head_fields[1].eq_ignore_ascii_case("label")
    {
        return Err(Error::ManifestFormat {
            row: 1,
            msg: format!("header must be `path,label[,split]`, got {header:?}"),
        });
    }

    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::ManifestFormat {
                row,
                msg: format!("expected 2 or 3 fields, got {}", fields.len()),
            });
        }
        let raw_path = fields[0].trim();
        if raw_path.is_empty() {
            return Err(Error::ManifestFormat {
                row,
                msg: "empty path".into(),
            });
        }
        let label = Label::parse(fields[1], row)?;
        let split = if fields.len() == 3 && !fields[2].trim().is_empty() {
            Some(Split::parse(fields[2], row)?)
        } else {
            None
        };
        let mut image_path = PathBuf::from(raw_path);
        if image_path.is_relative() {
            image_path = base.join(image_path);
        }
        if !seen.insert(image_path.clone()) {
            return Err(Error::DuplicatePath {
                row,
                path: image_path,
            });
        }
        if !image_path.is_file() {
            return Err(Error::MissingFile {
                row,
                path: image_path,
            });
        }
        records.push(ManifestRecord {
            image_path,
            label,
            split,
        });
    }
    Ok(DatasetManifest { records })
}

/// Writes a manifest back out as `path,label,split` rows.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut out = String::from("path,label,split\n");
    for r in &manifest.records {
        let split = r.split.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{}\n",
            r.image_path.display(),
            r.label.as_index(),
            split
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Default split ratios: 80% train, 10% validation, 10% test.
pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Assigns every record to a split: `val = round(val_ratio * N)` and
/// `test = round(test_ratio * N)` overall, the remainder to train.
/// Assignment is a seeded shuffle, stratified by label with largest-remainder
/// seat allocation so per-split class balance tracks the global balance.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetManifest> {
    let n = manifest.len();
    if n < 10 {
        return Err(Error::DatasetTooSmall { n, min: 10 });
    }
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::ManifestFormat {
            row: 0,
            msg: format!("split ratios must be positive and sum to 1, got {ratios:?}"),
        });
    }
    let val_total = (va * n as f64).round() as usize;
    let test_total = (te * n as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_label: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, r) in manifest.records.iter().enumerate() {
        by_label[r.label.as_index()].push(i);
    }
    for group in by_label.iter_mut() {
        group.shuffle(&mut rng);
    }

    let class_sizes = [by_label[0].len(), by_label[1].len()];
    let val_seats = largest_remainder(val_total, &class_sizes, n);
    // Test quotas come from the remaining pool per class so the two draws
    // cannot overbook a class.
    let remaining = [
        class_sizes[0] - val_seats[0],
        class_sizes[1] - val_seats[1],
    ];
    let test_seats = largest_remainder_bounded(test_total, &class_sizes, n, &remaining);

    let mut records = manifest.records.clone();
    for c in 0..2 {
        let ids = &by_label[c];
        let (v, t) = (val_seats[c], test_seats[c]);
        for (pos, &idx) in ids.iter().enumerate() {
            records[idx].split = Some(if pos < v {
                Split::Val
            } else if pos < v + t {
                Split::Test
            } else {
                Split::Train
            });
        }
    }
    Ok(DatasetManifest { records })
}

/// Allocates `total` seats across classes proportionally to class size,
/// distributing leftover seats by descending fractional part (ties to the
/// larger class, then lower class index).
fn largest_remainder(total: usize, class_sizes: &[usize; 2], n: usize) -> [usize; 2] {
    largest_remainder_bounded(total, class_sizes, n, class_sizes)
}

fn largest_remainder_bounded(
    total: usize,
    class_sizes: &[usize; 2],
    n: usize,
    bounds: &[usize; 2],
) -> [usize; 2] {
    let quota: Vec<f64> = class_sizes
        .iter()
        .map(|&c| total as f64 * c as f64 / n as f64)
        .collect();
    let mut seats = [
        (quota[0].floor() as usize).min(bounds[0]),
        (quota[1].floor() as usize).min(bounds[1]),
    ];
    let mut leftover = total.saturating_sub(seats[0] + seats[1]);
    let mut order = [0usize, 1usize];
    let frac = [quota[0] - quota[0].floor(), quota[1] - quota[1].floor()];
    if frac[1] > frac[0] || (frac[1] == frac[0] && class_sizes[1] > class_sizes[0]) {
        order = [1, 0];
    }
    let mut i = 0;
    while leftover > 0 {
        let c = order[i % 2];
        if seats[c] < bounds[c] {
            seats[c] += 1;
            leftover -= 1;
        }
        i += 1;
        if i > 4 * (total + 2) {
            break; // bounds exhausted; caller constraints make this unreachable
        }
    }
    seats
}
