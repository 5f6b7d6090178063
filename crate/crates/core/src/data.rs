//! Datasets: MNIST IDX files, seeded subsets and splits, and small synthetic
//! problems for smoke tests.
//!
//! IDX layout: big-endian `u32` magic (`0x00000803` for images,
//! `0x00000801` for labels; the third byte is the element type, `0x08` =
//! unsigned byte, the fourth the number of dimensions), one big-endian `u32`
//! per dimension, then the raw payload. Paths ending in `.gz` are
//! decompressed transparently.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KanError, Result};
use crate::tensor::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";
pub const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<usize>, num_classes: usize },
    Values(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    targets: Targets,
}

impl Dataset {
    pub fn classification(inputs: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() {
            return Err(KanError::Data(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(KanError::Data(format!(
                "label {l} at row {i} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            targets: Targets::Classes {
                labels,
                num_classes,
            },
        })
    }

    pub fn regression(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if targets.rows() != inputs.rows() {
            return Err(KanError::Data(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self {
            inputs,
            targets: Targets::Values(targets),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { num_classes, .. } => Some(*num_classes),
            Targets::Values(_) => None,
        }
    }

    /// Number of target columns: classes for classification, value width
    /// for regression.
    pub fn target_dim(&self) -> usize {
        match &self.targets {
            Targets::Classes { num_classes, .. } => *num_classes,
            Targets::Values(m) => m.cols(),
        }
    }

    pub fn class_counts(&self) -> Option<Vec<usize>> {
        let Targets::Classes {
            labels,
            num_classes,
        } = &self.targets
        else {
            return None;
        };
        let mut counts = vec![0; *num_classes];
        for &l in labels {
            counts[l] += 1;
        }
        Some(counts)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let inputs = self.inputs.select_rows(indices);
        let targets = match &self.targets {
            Targets::Classes {
                labels,
                num_classes,
            } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
            Targets::Values(m) => Targets::Values(m.select_rows(indices)),
        };
        Dataset { inputs, targets }
    }
}

/// A parsed IDX file: dimension sizes plus the unsigned-byte payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| KanError::io(path, e))?;
    let mut bytes = Vec::new();
    if is_gzip(path) {
        GzDecoder::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| KanError::format(path, format!("gzip decode failed: {e}")))?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes).map_err(|e| KanError::io(path, e))?;
    }
    Ok(bytes)
}

/// Parses an unsigned-byte IDX file whose magic must equal `expected_magic`.
pub fn read_idx(path: impl AsRef<Path>, expected_magic: u32) -> Result<IdxArray> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    parse_idx(&bytes, expected_magic).map_err(|msg| KanError::format(path, msg))
}

fn parse_idx(bytes: &[u8], expected_magic: u32) -> std::result::Result<IdxArray, String> {
    let word = |i: usize| -> std::result::Result<u32, String> {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| format!("truncated header: {} bytes", bytes.len()))
    };
    let magic = word(0)?;
    if magic != expected_magic {
        return Err(format!(
            "bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        ));
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (1..=ndims)
        .map(|i| word(i).map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let header = 4 * (1 + ndims);
    let expected = dims.iter().product::<usize>();
    let actual = bytes.len() - header;
    if actual < expected {
        return Err(format!(
            "truncated payload: expected {expected} bytes, found {actual}"
        ));
    }
    if actual > expected {
        return Err(format!(
            "trailing data: expected {expected} payload bytes, found {actual}"
        ));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Writes an unsigned-byte IDX file; gzip-compressed when the path ends in
/// `.gz`.
pub fn write_idx(path: impl AsRef<Path>, dims: &[usize], data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if dims.iter().product::<usize>() != data.len() {
        return Err(KanError::Argument(format!(
            "dims {dims:?} do not match {} payload bytes",
            data.len()
        )));
    }
    let mut bytes = Vec::with_capacity(4 * (dims.len() + 1) + data.len());
    bytes.extend_from_slice(&(0x0800u32 | dims.len() as u32).to_be_bytes());
    for &d in dims {
        bytes.extend_from_slice(&(d as u32).to_be_bytes());
    }
    bytes.extend_from_slice(data);
    let file = File::create(path).map_err(|e| KanError::io(path, e))?;
    let result = if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut file = file;
        file.write_all(&bytes)
    };
    result.map_err(|e| KanError::io(path, e))
}

/// Images as an `n × (rows·cols)` matrix scaled to `[0, 1]`.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let idx = read_idx(path, IDX_IMAGES_MAGIC)?;
    let n = idx.dims[0];
    let width = idx.dims[1] * idx.dims[2];
    if n == 0 || width == 0 {
        return Err(KanError::format(path, "empty image file"));
    }
    let data = idx.data.iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::from_vec(n, width, data)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let idx = read_idx(path, IDX_LABELS_MAGIC)?;
    Ok(idx.data.iter().map(|&b| b as usize).collect())
}

/// Finds `name` or `name.gz` under `dir`.
pub fn locate(dir: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(KanError::Data(format!(
        "{} not found (looked for {name} and {name}.gz); expected files: {}",
        dir.display(),
        [
            MNIST_TRAIN_IMAGES,
            MNIST_TRAIN_LABELS,
            MNIST_TEST_IMAGES,
            MNIST_TEST_LABELS
        ]
        .join(", ")
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

/// Loads one MNIST split from a directory holding the canonical files.
pub fn load_mnist(dir: impl AsRef<Path>, split: MnistSplit) -> Result<Dataset> {
    let (images, labels) = match split {
        MnistSplit::Train => (MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS),
        MnistSplit::Test => (MNIST_TEST_IMAGES, MNIST_TEST_LABELS),
    };
    let dir = dir.as_ref();
    let images_path = locate(dir, images)?;
    let inputs = load_idx_images(&images_path)?;
    let labels = load_idx_labels(locate(dir, labels)?)?;
    if labels.len() != inputs.rows() {
        return Err(KanError::format(
            images_path,
            format!("{} images but {} labels", inputs.rows(), labels.len()),
        ));
    }
    Dataset::classification(inputs, labels, MNIST_CLASSES)
}

/// Class-balanced seeded sample of `n` rows.
///
/// Each class gets `n / classes` rows (the first `n % classes` classes one
/// more); a class with too few rows contributes all of them and the
/// shortfall is shared among the rest. Regression sets are sampled
/// uniformly without replacement. The result is shuffled.
pub fn subset(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > ds.len() {
        return Err(KanError::Argument(format!(
            "subset of {n} requested from {} rows",
            ds.len()
        )));
    }
    if n == 0 {
        return Err(KanError::Argument("subset size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = match ds.targets() {
        Targets::Values(_) => {
            let mut all: Vec<usize> = (0..ds.len()).collect();
            all.shuffle(&mut rng);
            all.truncate(n);
            all
        }
        Targets::Classes {
            labels,
            num_classes,
        } => {
            let mut by_class = vec![Vec::new(); *num_classes];
            for (i, &l) in labels.iter().enumerate() {
                by_class[l].push(i);
            }
            for members in &mut by_class {
                members.shuffle(&mut rng);
            }
            let quotas = balanced_quotas(
                &by_class.iter().map(Vec::len).collect::<Vec<_>>(),
                n,
            );
            by_class
                .into_iter()
                .zip(quotas)
                .flat_map(|(members, q)| members.into_iter().take(q))
                .collect()
        }
    };
    chosen.shuffle(&mut rng);
    Ok(ds.select(&chosen))
}

/// Water-filling allocation of `n` draws over classes with `available`
/// rows each.
fn balanced_quotas(available: &[usize], n: usize) -> Vec<usize> {
    let mut quotas = vec![0; available.len()];
    let mut open: Vec<usize> = (0..available.len()).filter(|&c| available[c] > 0).collect();
    let mut remaining = n;
    while remaining > 0 && !open.is_empty() {
        let share = remaining / open.len();
        let extra = remaining % open.len();
        let mut next = Vec::new();
        let mut handed = 0;
        for (rank, &c) in open.iter().enumerate() {
            let want = share + usize::from(rank < extra);
            let take = want.min(available[c] - quotas[c]);
            quotas[c] += take;
            handed += take;
            if quotas[c] < available[c] {
                next.push(c);
            }
        }
        remaining -= handed;
        if next.len() == open.len() && handed == 0 {
            break;
        }
        open = next;
    }
    quotas
}

/// Seeded shuffle, then the last `val_count` rows become the validation set.
pub fn split_validation(ds: &Dataset, val_count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if val_count == 0 || val_count >= ds.len() {
        return Err(KanError::Argument(format!(
            "validation size {val_count} must be in 1..{}",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, val) = order.split_at(ds.len() - val_count);
    Ok((ds.select(train), ds.select(val)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTask {
    /// `sin(πx)` on `[-1, 1]`.
    Sine,
    /// `exp(-4(x² + y²))` on `[-1, 1]²`.
    GaussianBump,
    /// `x·y` on `[-1, 1]²`.
    Product,
}

impl SynthTask {
    pub fn input_dim(self) -> usize {
        match self {
            SynthTask::Sine => 1,
            SynthTask::GaussianBump | SynthTask::Product => 2,
        }
    }

    pub fn target(self, point: &[f64]) -> f64 {
        match self {
            SynthTask::Sine => (std::f64::consts::PI * point[0]).sin(),
            SynthTask::GaussianBump => (-4.0 * (point[0] * point[0] + point[1] * point[1])).exp(),
            SynthTask::Product => point[0] * point[1],
        }
    }
}

impl std::str::FromStr for SynthTask {
    type Err = KanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthTask::Sine),
            "gaussian_bump" => Ok(SynthTask::GaussianBump),
            "product" => Ok(SynthTask::Product),
            other => Err(KanError::Argument(format!(
                "unknown synthetic task {other:?} (expected sine, gaussian_bump or product)"
            ))),
        }
    }
}

/// `n` seeded uniform points in `[-1, 1]^d` with the task's targets.
pub fn synth_regression(task: SynthTask, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(KanError::Argument("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = task.input_dim();
    let inputs = Matrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..=1.0));
    let targets = Matrix::from_fn(n, 1, |r, _| task.target(inputs.row(r)));
    Dataset::regression(inputs, targets)
}

/// The four XOR points on `{0, 1}²` labelled by parity.
pub fn xor() -> Dataset {
    let inputs = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        .expect("static shape");
    Dataset::classification(inputs, vec![0, 1, 1, 0], 2).expect("static labels")
}
